#pragma once

#include "agfn/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace agfn {

// Binary accuracy under the negative (score < 0) vs non-negative rule,
// applied to predictions and targets alike.
double acc2(const Vec& pred, const Vec& target);

// F1 with the non-negative class as positive; 0 when precision + recall
// degenerates (no true positives).
double f1_binary(const Vec& pred, const Vec& target);

// Seven-class accuracy: clamp to [-3, 3], round half away from zero, compare.
double acc7(const Vec& pred, const Vec& target);

// Mean absolute error on the raw continuous scale.
double mae(const Vec& pred, const Vec& target);

// Mean absolute Pearson correlation between each embedding axis and the
// prediction errors. In [0, 1]; exactly 0 for constant errors.
double psc(const Mat& coords, const Vec& errors);

// Flags the ceil(fraction * n) largest |errors|; ties keep the lower index.
std::vector<bool> high_error_mask(const Vec& errors, double fraction = 0.10);

struct MetricsReport {
  double acc2 = 0.0;
  double f1 = 0.0;
  double acc7 = 0.0;
  double mae = 0.0;
  std::optional<double> psc;
  std::uint64_t seed = 0;
  std::string config_hash;
};

MetricsReport compute_metrics(const Vec& pred, const Vec& target, std::uint64_t seed,
                              const std::string& config_hash);

// Flat key=value block; numbers at 6 decimal digits. Keys, in order:
// acc2, f1, acc7, mae, mae_x100, [psc,] seed, config_hash.
std::string format_report(const MetricsReport& report);

}  // namespace agfn
