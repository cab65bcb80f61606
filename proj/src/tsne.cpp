#include "agfn/tsne.hpp"

#include <cfloat>
#include <cmath>

namespace agfn {

namespace {

Mat pairwise_squared_distances(const Mat& x) {
  const Vec sq = x.rowwise().squaredNorm();
  Mat d = -2.0 * x * x.transpose();
  d.colwise() += sq;
  d.rowwise() += sq.transpose();
  d.diagonal().setZero();
  return d.cwiseMax(0.0);
}

// Conditional p_{j|i} for a given precision; returns the induced perplexity.
double fill_row(const Mat& dist, Index i, double beta, Vec& p_row) {
  const Index n = dist.rows();
  double min_d = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < n; ++j)
    if (j != i) min_d = std::min(min_d, dist(i, j));

  double sum = 0.0;
  for (Index j = 0; j < n; ++j) {
    if (j == i) {
      p_row(j) = 0.0;
      continue;
    }
    p_row(j) = std::exp(-beta * (dist(i, j) - min_d));
    sum += p_row(j);
  }
  p_row /= sum;

  double entropy = 0.0;
  for (Index j = 0; j < n; ++j)
    if (p_row(j) > 0.0) entropy -= p_row(j) * std::log(p_row(j));
  return std::exp(entropy);
}

}  // namespace

Affinities tsne_affinities(const Mat& features, double perplexity, double tolerance,
                           Index max_bisections) {
  const Index n = features.rows();
  if (n < 5) throw std::domain_error("tsne: need at least 5 points");
  if (perplexity >= static_cast<double>(n)) throw std::domain_error("tsne: perplexity must be < n");
  if (perplexity <= 1.0) throw std::domain_error("tsne: perplexity must be > 1");

  const Mat dist = pairwise_squared_distances(features);

  Affinities a;
  a.conditional.setZero(n, n);
  a.achieved_perplexity.resize(n);
  a.beta.resize(n);

  Vec row(n);
  for (Index i = 0; i < n; ++i) {
    // Bisection on log(beta): exponential bracket expansion, then geometric
    // midpoints. Perplexity decreases monotonically in beta.
    double beta = 1.0;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double perp = fill_row(dist, i, beta, row);
    Index iter = 0;
    while (std::abs(perp - perplexity) > tolerance && iter < max_bisections) {
      if (perp > perplexity) {
        lo = beta;
        beta = std::isfinite(hi) ? std::sqrt(lo * hi) : beta * 2.0;
      } else {
        hi = beta;
        beta = (lo > 0.0) ? std::sqrt(lo * hi) : beta * 0.5;
      }
      perp = fill_row(dist, i, beta, row);
      ++iter;
    }
    a.conditional.row(i) = row.transpose();
    a.achieved_perplexity(i) = perp;
    a.beta(i) = beta;
  }

  a.joint = (a.conditional + a.conditional.transpose()) / (2.0 * static_cast<double>(n));
  return a;
}

Mat pca_init(const Mat& features) {
  const Index n = features.rows();
  const Index d = features.cols();
  Mat centered = features.rowwise() - features.colwise().mean();

  Mat projections(n, 2);
  if (d == 1) {
    projections.col(0) = centered.col(0);
    projections.col(1).setZero();
  } else {
    const Mat cov = centered.transpose() * centered / static_cast<double>(n > 1 ? n - 1 : 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    // Eigenvalues ascend; take the top two and pin each sign so the largest
    // component is positive.
    for (int k = 0; k < 2; ++k) {
      Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - k);
      Index which = 0;
      v.cwiseAbs().maxCoeff(&which);
      if (v(which) < 0.0) v = -v;
      projections.col(k) = centered * v;
    }
  }

  const double std0 = std::sqrt(projections.col(0).squaredNorm() / static_cast<double>(n));
  if (std0 > 0.0) projections *= 1e-4 / std0;
  return projections;
}

namespace {

double kl_divergence(const Mat& p, const Mat& q_num, double q_sum) {
  double kl = 0.0;
  for (Index i = 0; i < p.rows(); ++i) {
    for (Index j = 0; j < p.cols(); ++j) {
      if (i == j || p(i, j) <= 0.0) continue;
      const double q = std::max(q_num(i, j) / q_sum, DBL_MIN);
      kl += p(i, j) * std::log(p(i, j) / q);
    }
  }
  return kl;
}

Mat student_t_numerators(const Mat& y) {
  const Vec sq = y.rowwise().squaredNorm();
  Mat d = -2.0 * y * y.transpose();
  d.colwise() += sq;
  d.rowwise() += sq.transpose();
  Mat num = (1.0 + d.cwiseMax(0.0).array()).inverse().matrix();
  num.diagonal().setZero();
  return num;
}

}  // namespace

Embedding2D tsne(const Mat& features, const TsneOptions& opts) {
  const Index n = features.rows();
  const Affinities aff =
      tsne_affinities(features, opts.perplexity, opts.perplexity_tolerance, opts.max_bisections);
  const Mat& p = aff.joint;

  Embedding2D emb;
  emb.coords = pca_init(features);
  Mat velocity = Mat::Zero(n, 2);
  Mat gains = Mat::Ones(n, 2);

  {
    const Mat num0 = student_t_numerators(emb.coords);
    emb.kl_history.push_back(kl_divergence(p, num0, num0.sum()));
  }

  for (Index iter = 1; iter <= opts.iterations; ++iter) {
    const double exaggeration = (iter <= opts.exaggeration_window) ? opts.early_exaggeration : 1.0;
    const double momentum = (iter <= opts.momentum_switch) ? 0.5 : 0.8;

    const Mat num = student_t_numerators(emb.coords);
    const double q_sum = num.sum();

    // c_ij = (exaggeration * P_ij - Q_ij) * num_ij; grad_i = 4 sum_j c_ij (y_i - y_j)
    const Mat c = ((exaggeration * p - num / q_sum).array() * num.array()).matrix();
    const Vec row_sums = c.rowwise().sum();
    Mat grad = 4.0 * (row_sums.asDiagonal() * emb.coords - c * emb.coords);

    for (Index i = 0; i < n; ++i) {
      for (int k = 0; k < 2; ++k) {
        const bool same_sign = (grad(i, k) > 0.0) == (velocity(i, k) > 0.0);
        gains(i, k) = same_sign ? gains(i, k) * 0.8 : gains(i, k) + 0.2;
        gains(i, k) = std::max(gains(i, k), 0.01);
      }
    }
    velocity = momentum * velocity - opts.learning_rate * gains.cwiseProduct(grad);
    emb.coords += velocity;
    emb.coords.rowwise() -= emb.coords.colwise().mean();

    if (opts.kl_record_every > 0 && iter % opts.kl_record_every == 0) {
      const Mat num_now = student_t_numerators(emb.coords);
      emb.kl_history.push_back(kl_divergence(p, num_now, num_now.sum()));
    }
  }

  if (opts.kl_record_every <= 0 || opts.iterations % opts.kl_record_every != 0) {
    const Mat num_now = student_t_numerators(emb.coords);
    emb.kl_history.push_back(kl_divergence(p, num_now, num_now.sum()));
  }
  return emb;
}

}  // namespace agfn
