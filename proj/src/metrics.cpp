#include "agfn/metrics.hpp"

#include "agfn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace agfn {

namespace {

void check_pair(const Vec& pred, const Vec& target) {
  if (pred.size() != target.size()) throw std::domain_error("metrics: length mismatch");
  if (pred.size() < 1) throw std::domain_error("metrics: empty input");
}

inline bool non_negative(double score) { return !(score < 0.0); }

inline int seven_class(double score) {
  const double clamped = std::min(3.0, std::max(-3.0, score));
  return static_cast<int>(std::round(clamped));  // round halves away from zero
}

}  // namespace

double acc2(const Vec& pred, const Vec& target) {
  check_pair(pred, target);
  Index hits = 0;
  for (Index i = 0; i < pred.size(); ++i)
    if (non_negative(pred(i)) == non_negative(target(i))) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double f1_binary(const Vec& pred, const Vec& target) {
  check_pair(pred, target);
  Index tp = 0, fp = 0, fn = 0;
  for (Index i = 0; i < pred.size(); ++i) {
    const bool p = non_negative(pred(i));
    const bool t = non_negative(target(i));
    if (p && t) ++tp;
    else if (p && !t) ++fp;
    else if (!p && t) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double acc7(const Vec& pred, const Vec& target) {
  check_pair(pred, target);
  Index hits = 0;
  for (Index i = 0; i < pred.size(); ++i)
    if (seven_class(pred(i)) == seven_class(target(i))) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double mae(const Vec& pred, const Vec& target) {
  check_pair(pred, target);
  return (pred - target).cwiseAbs().mean();
}

double psc(const Mat& coords, const Vec& errors) {
  require_shape(coords.cols() == 2, "psc: coords must be n x 2");
  require_shape(coords.rows() == errors.size(), "psc: coords/errors length mismatch");
  if (errors.size() < 2) throw std::domain_error("psc: need at least 2 samples");
  const double cx = std::abs(pearson(coords.col(0), errors));
  const double cy = std::abs(pearson(coords.col(1), errors));
  return 0.5 * (cx + cy);
}

std::vector<bool> high_error_mask(const Vec& errors, double fraction) {
  if (errors.size() < 1) throw std::domain_error("high_error_mask: empty input");
  if (fraction < 0.0 || fraction > 1.0) throw std::domain_error("high_error_mask: fraction out of [0,1]");
  const Index n = errors.size();
  const Index k = static_cast<Index>(std::ceil(fraction * static_cast<double>(n)));

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&errors](Index a, Index b) {
    return std::abs(errors(a)) > std::abs(errors(b));
  });

  std::vector<bool> mask(static_cast<std::size_t>(n), false);
  for (Index i = 0; i < k; ++i) mask[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  return mask;
}

MetricsReport compute_metrics(const Vec& pred, const Vec& target, std::uint64_t seed,
                              const std::string& config_hash) {
  MetricsReport r;
  r.acc2 = acc2(pred, target);
  r.f1 = f1_binary(pred, target);
  r.acc7 = acc7(pred, target);
  r.mae = mae(pred, target);
  r.seed = seed;
  r.config_hash = config_hash;
  return r;
}

std::string format_report(const MetricsReport& report) {
  std::string out;
  char buf[64];
  auto line = [&out, &buf](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s=%.6f\n", key, v);
    out += buf;
  };
  line("acc2", report.acc2);
  line("f1", report.f1);
  line("acc7", report.acc7);
  line("mae", report.mae);
  line("mae_x100", report.mae * 100.0);
  if (report.psc.has_value()) line("psc", *report.psc);
  std::snprintf(buf, sizeof(buf), "seed=%llu\n", static_cast<unsigned long long>(report.seed));
  out += buf;
  out += "config_hash=" + report.config_hash + "\n";
  return out;
}

}  // namespace agfn
