#include "agfn/numerics.hpp"

#include <cmath>

namespace agfn {

Mat matmul(const Mat& a, const Mat& b) {
  require_shape(a.cols() == b.rows(), "matmul: inner dimensions differ");
  return a * b;
}

Vec softmax(const Vec& v) {
  if (v.size() == 0) throw std::domain_error("softmax: empty input");
  const double m = v.maxCoeff();
  Vec e = (v.array() - m).exp();
  return e / e.sum();
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec sigmoid(const Vec& v) {
  return v.unaryExpr([](double x) { return sigmoid_scalar(x); });
}

double pearson(const Vec& x, const Vec& y) {
  if (x.size() != y.size()) throw std::domain_error("pearson: length mismatch");
  if (x.size() < 2) throw std::domain_error("pearson: need at least 2 samples");
  const Vec xc = x.array() - x.mean();
  const Vec yc = y.array() - y.mean();
  const double sx = xc.squaredNorm();
  const double sy = yc.squaredNorm();
  if (sx == 0.0 || sy == 0.0) return 0.0;
  return xc.dot(yc) / std::sqrt(sx * sy);
}

double feature_entropy(const Vec& h) {
  if (h.size() < 2) throw std::domain_error("feature_entropy: dim must be >= 2");
  const Vec p = softmax(h);
  // p > 0 always holds after softmax, so p*log(p) is finite.
  return -(p.array() * p.array().log()).sum();
}

Vec feature_entropy_grad(const Vec& h) {
  if (h.size() < 2) throw std::domain_error("feature_entropy: dim must be >= 2");
  const Vec p = softmax(h);
  const double entropy = -(p.array() * p.array().log()).sum();
  // dH/dh_j = -p_j (ln p_j + H)
  return (-p.array() * (p.array().log() + entropy)).matrix();
}

double global_norm(const std::vector<Mat*>& grads) {
  double sq = 0.0;
  for (const Mat* g : grads) sq += g->squaredNorm();
  return std::sqrt(sq);
}

double global_norm_clip(std::vector<Mat*>& grads, double max_norm) {
  if (max_norm <= 0.0) throw std::domain_error("global_norm_clip: max_norm must be positive");
  const double norm = global_norm(grads);
  if (norm <= max_norm) return 1.0;
  const double scale = max_norm / norm;
  for (Mat* g : grads) *g *= scale;
  return scale;
}

}  // namespace agfn
