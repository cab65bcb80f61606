#include "agfn/fusion.hpp"

#include <cmath>

namespace agfn {

namespace {

// The packed triple is row-major, so its data block is already the
// concatenation concat(h_T, h_A, h_V).
Mat concat_rows(const Mat& x) {
  return Eigen::Map<const Mat>(x.data(), 1, x.size());
}

Mat unconcat_rows(const Mat& c, Index rows, Index cols) {
  return Eigen::Map<const Mat>(c.data(), rows, cols);
}

}  // namespace

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "full") return FusionMode::Full;
  if (s == "ieg_only") return FusionMode::IegOnly;
  if (s == "mig_only") return FusionMode::MigOnly;
  if (s == "no_gfm") return FusionMode::NoGfm;
  throw ConfigError("unknown fusion mode '" + s + "' (expected full|ieg_only|mig_only|no_gfm)");
}

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::Full: return "full";
    case FusionMode::IegOnly: return "ieg_only";
    case FusionMode::MigOnly: return "mig_only";
    case FusionMode::NoGfm: return "no_gfm";
  }
  throw std::logic_error("unreachable fusion mode");
}

Vec entropy_gate_weights(const Vec& z, const Vec& entropy, double tau) {
  if (tau <= 0.0) throw std::domain_error("entropy_gate_weights: tau must be positive");
  const Vec scaled = (z.array() * (-entropy.array() / tau).exp()).matrix();
  return softmax(scaled);
}

EntropyGate::EntropyGate(std::string name, Index dim, double tau, Rng& init)
    : zproj_(name + ".z", 3 * dim, 3, init),
      log_tau_(name + ".log_tau", Mat::Constant(1, 1, std::log(tau)), /*train=*/false) {
  if (tau <= 0.0) throw std::domain_error("entropy_gate: tau must be positive");
  require_shape(dim >= 2, "entropy_gate: dim must be >= 2 for feature entropy");
}

std::vector<Param*> EntropyGate::params() {
  auto p = zproj_.params();
  p.push_back(&log_tau_);
  return p;
}

double EntropyGate::tau() const {
  return std::exp(log_tau_.value(0, 0));
}

GateDiagnostics EntropyGate::diagnostics() const {
  GateDiagnostics d;
  d.entropy = entropy_;
  d.entropy_weights = weights_;
  d.alpha = 1.0;
  return d;
}

Mat EntropyGate::forward_impl(const Mat& x) {
  require_shape(x.rows() == 3, "entropy_gate: expected packed 3 x d triple");
  input_ = x;
  concat_ = concat_rows(x);

  z_ = zproj_.value(concat_).row(0).transpose();
  entropy_.resize(3);
  for (Index m = 0; m < 3; ++m) entropy_(m) = feature_entropy(x.row(m).transpose());

  const double t = tau();
  decay_ = (-entropy_.array() / t).exp();
  weights_ = softmax((z_.array() * decay_.array()).matrix());

  Mat out = Mat::Zero(1, x.cols());
  for (Index m = 0; m < 3; ++m) out.row(0) += weights_(m) * x.row(m);
  return out;
}

Mat EntropyGate::backward_impl(const Mat& grad_out) {
  const double t = tau();

  Vec d_weights(3);
  for (Index m = 0; m < 3; ++m) d_weights(m) = grad_out.row(0).dot(input_.row(m));

  // Softmax Jacobian on the gate logits a_m = z_m * exp(-H_m / tau).
  const double dot = weights_.dot(d_weights);
  const Vec d_logits = (weights_.array() * (d_weights.array() - dot)).matrix();

  const Vec d_z = (d_logits.array() * decay_.array()).matrix();
  const Vec d_entropy = (d_logits.array() * z_.array() * decay_.array() * (-1.0 / t)).matrix();
  const double d_tau = (d_logits.array() * z_.array() * decay_.array() * entropy_.array() / (t * t)).sum();
  log_tau_.grad(0, 0) += d_tau * t;

  Mat d_concat = zproj_.vjp(concat_, d_z.transpose(), /*accumulate_param_grads=*/true);
  Mat dx = unconcat_rows(d_concat, 3, input_.cols());

  for (Index m = 0; m < 3; ++m) {
    dx.row(m) += weights_(m) * grad_out.row(0);
    dx.row(m) += d_entropy(m) * feature_entropy_grad(input_.row(m).transpose()).transpose();
  }
  return dx;
}

ImportanceGate::ImportanceGate(std::string name, Index dim, Rng& init)
    : gproj_(name + ".g", 3 * dim, dim, init), fproj_(name + ".f", 3 * dim, dim, init) {}

std::vector<Param*> ImportanceGate::params() {
  auto p = gproj_.params();
  for (Param* q : fproj_.params()) p.push_back(q);
  return p;
}

GateDiagnostics ImportanceGate::diagnostics() const {
  GateDiagnostics d;
  d.importance = gate_;
  d.alpha = 0.0;
  return d;
}

Mat ImportanceGate::forward_impl(const Mat& x) {
  require_shape(x.rows() == 3, "importance_gate: expected packed 3 x d triple");
  input_ = x;
  concat_ = concat_rows(x);

  gate_ = sigmoid(gproj_.value(concat_).row(0).transpose());

  Mat gated(3, x.cols());
  for (Index m = 0; m < 3; ++m) gated.row(m) = x.row(m).cwiseProduct(gate_.transpose());
  gated_concat_ = concat_rows(gated);

  return fproj_.value(gated_concat_);
}

Mat ImportanceGate::backward_impl(const Mat& grad_out) {
  const Index d = input_.cols();

  Mat d_gated_concat = fproj_.vjp(gated_concat_, grad_out, /*accumulate_param_grads=*/true);
  Mat d_gated = unconcat_rows(d_gated_concat, 3, d);

  Mat dx(3, d);
  Vec d_gate = Vec::Zero(d);
  for (Index m = 0; m < 3; ++m) {
    dx.row(m) = d_gated.row(m).cwiseProduct(gate_.transpose());
    d_gate += d_gated.row(m).cwiseProduct(input_.row(m)).transpose();
  }

  const Vec d_gate_logits =
      (d_gate.array() * gate_.array() * (1.0 - gate_.array())).matrix();
  Mat d_concat = gproj_.vjp(concat_, d_gate_logits.transpose(), /*accumulate_param_grads=*/true);
  dx += unconcat_rows(d_concat, 3, d);
  return dx;
}

AdaptiveFuse::AdaptiveFuse(std::string name, Index dim, double tau, Rng& init)
    : entropy_gate_(name + ".ieg", dim, tau, init),
      importance_gate_(name + ".mig", dim, init),
      alpha_raw_(name + ".alpha_raw", Mat::Zero(1, 1)) {}

std::vector<Param*> AdaptiveFuse::params() {
  auto p = entropy_gate_.params();
  for (Param* q : importance_gate_.params()) p.push_back(q);
  p.push_back(&alpha_raw_);
  return p;
}

double AdaptiveFuse::alpha() const {
  return sigmoid_scalar(alpha_raw_.value(0, 0));
}

GateDiagnostics AdaptiveFuse::diagnostics() const {
  GateDiagnostics d;
  d.entropy = entropy_gate_.last_entropy();
  d.entropy_weights = entropy_gate_.last_weights();
  d.importance = importance_gate_.last_gate();
  d.alpha = alpha();
  return d;
}

Mat AdaptiveFuse::forward_impl(const Mat& x) {
  h_entropy_ = entropy_gate_.forward(x);
  h_importance_ = importance_gate_.forward(x);
  const double a = alpha();
  return a * h_entropy_ + (1.0 - a) * h_importance_;
}

Mat AdaptiveFuse::backward_impl(const Mat& grad_out) {
  const double a = alpha();
  const double d_alpha = (grad_out.array() * (h_entropy_ - h_importance_).array()).sum();
  alpha_raw_.grad(0, 0) += d_alpha * a * (1.0 - a);
  Mat dx = entropy_gate_.backward(a * grad_out);
  dx += importance_gate_.backward((1.0 - a) * grad_out);
  return dx;
}

ConcatProject::ConcatProject(std::string name, Index dim, Rng& init)
    : proj_(name + ".proj", 3 * dim, dim, init) {}

Mat ConcatProject::forward_impl(const Mat& x) {
  require_shape(x.rows() == 3, "concat_project: expected packed 3 x d triple");
  return proj_.forward(concat_rows(x));
}

Mat ConcatProject::backward_impl(const Mat& grad_out) {
  Mat d_concat = proj_.backward(grad_out);
  return unconcat_rows(d_concat, 3, d_concat.cols() / 3);
}

Vec concat_fuse(const EncodedTriple& t) {
  require_shape(t.audio.size() == t.text.size() && t.visual.size() == t.text.size(),
                "concat_fuse: modality dims differ");
  Vec out(3 * t.text.size());
  out << t.text, t.audio, t.visual;
  return out;
}

std::unique_ptr<FusionLayer> make_fusion_layer(FusionMode mode, Index dim, double tau, Rng& init) {
  switch (mode) {
    case FusionMode::Full: return std::make_unique<AdaptiveFuse>("fusion", dim, tau, init);
    case FusionMode::IegOnly: return std::make_unique<EntropyGate>("fusion", dim, tau, init);
    case FusionMode::MigOnly: return std::make_unique<ImportanceGate>("fusion", dim, init);
    case FusionMode::NoGfm: return std::make_unique<ConcatProject>("fusion", dim, init);
  }
  throw std::logic_error("unreachable fusion mode");
}

}  // namespace agfn
