#pragma once

#include "agfn/types.hpp"

#include <vector>

namespace agfn {

struct TsneOptions {
  double perplexity = 30.0;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  Index iterations = 2000;
  Index exaggeration_window = 250;  // iterations with exaggerated attractions
  Index momentum_switch = 250;      // momentum 0.5 before, 0.8 after
  double perplexity_tolerance = 1e-3;
  Index max_bisections = 60;
  Index kl_record_every = 50;
};

struct Embedding2D {
  Mat coords;                  // n x 2
  std::vector<double> kl_history;  // KL(P||Q) at iteration 0 and every kl_record_every
};

struct Affinities {
  Mat conditional;          // row i: p_{j|i}
  Mat joint;                // symmetrized, sums to 1
  Vec achieved_perplexity;  // per-point, after the binary search
  Vec beta;                 // precision 1/(2 sigma^2) per point
};

// Per-point Gaussian bandwidths by bisection on log(beta) until the induced
// conditional distribution's perplexity is within tolerance of the target.
Affinities tsne_affinities(const Mat& features, double perplexity, double tolerance,
                           Index max_bisections);

// First two principal components, scaled so the first embedding axis has
// standard deviation 1e-4.
Mat pca_init(const Mat& features);

// Exact O(n^2) t-SNE to two dimensions with early exaggeration and the
// momentum/gain update of the reference procedure. Deterministic: PCA
// initialization, no random jitter.
Embedding2D tsne(const Mat& features, const TsneOptions& opts = {});

}  // namespace agfn
