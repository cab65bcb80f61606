#pragma once

#include "agfn/encoders.hpp"
#include "agfn/numerics.hpp"

#include <memory>
#include <optional>

namespace agfn {

enum class FusionMode { Full, IegOnly, MigOnly, NoGfm };

FusionMode parse_fusion_mode(const std::string& s);
std::string to_string(FusionMode mode);

// Per-sample record of what the gates did: modality entropies (nats), the
// entropy-gate simplex weights, the importance-gate vector and the blend
// coefficient. Fields are empty when the active variant does not compute them.
struct GateDiagnostics {
  Vec entropy;         // 3
  Vec entropy_weights; // 3, sums to 1
  Vec importance;      // d, entries in (0,1)
  double alpha = 0.0;
};

// Softmax over modalities of z_m * exp(-H_m / tau).
Vec entropy_gate_weights(const Vec& z, const Vec& entropy, double tau);

// Common surface for the fusion variants: input is the packed 3 x d triple
// (rows T, A, V), output the fused 1 x d representation.
class FusionLayer : public Layer {
 public:
  virtual GateDiagnostics diagnostics() const = 0;
  virtual FusionMode mode() const = 0;
};

// Information entropy gate: w = softmax_m(z_m e^{-H(h_m)/tau}) with scalar
// logits z = Wz concat(h_T, h_A, h_V); output sum_m w_m h_m.
class EntropyGate : public FusionLayer {
 public:
  EntropyGate(std::string name, Index dim, double tau, Rng& init);

  std::string_view kind() const override { return "entropy_gate"; }
  std::vector<Param*> params() override;
  GateDiagnostics diagnostics() const override;
  FusionMode mode() const override { return FusionMode::IegOnly; }

  double tau() const;
  const Vec& last_entropy() const { return entropy_; }
  const Vec& last_weights() const { return weights_; }

 protected:
  Mat forward_impl(const Mat& x) override;
  Mat backward_impl(const Mat& grad_out) override;

 private:
  Affine zproj_;
  Param log_tau_;  // frozen; tau = exp(log_tau)
  Mat input_;
  Mat concat_;
  Vec z_, entropy_, decay_, weights_;
};

// Modality importance gate: g = sigmoid(Wg concat), shared across modalities,
// output Wf concat(g .* h_T, g .* h_A, g .* h_V).
class ImportanceGate : public FusionLayer {
 public:
  ImportanceGate(std::string name, Index dim, Rng& init);

  std::string_view kind() const override { return "importance_gate"; }
  std::vector<Param*> params() override;
  GateDiagnostics diagnostics() const override;
  FusionMode mode() const override { return FusionMode::MigOnly; }

  const Vec& last_gate() const { return gate_; }

 protected:
  Mat forward_impl(const Mat& x) override;
  Mat backward_impl(const Mat& grad_out) override;

 private:
  Affine gproj_;
  Affine fproj_;
  Mat input_;
  Mat concat_;
  Mat gated_concat_;
  Vec gate_;
};

// Full mechanism: alpha h_entropy + (1 - alpha) h_importance with
// alpha = sigmoid(alpha_raw) learned.
class AdaptiveFuse : public FusionLayer {
 public:
  AdaptiveFuse(std::string name, Index dim, double tau, Rng& init);

  std::string_view kind() const override { return "adaptive_fuse"; }
  std::vector<Param*> params() override;
  GateDiagnostics diagnostics() const override;
  FusionMode mode() const override { return FusionMode::Full; }

  double alpha() const;
  EntropyGate& entropy_gate() { return entropy_gate_; }
  ImportanceGate& importance_gate() { return importance_gate_; }

 protected:
  Mat forward_impl(const Mat& x) override;
  Mat backward_impl(const Mat& grad_out) override;

 private:
  EntropyGate entropy_gate_;
  ImportanceGate importance_gate_;
  Param alpha_raw_;
  Mat h_entropy_, h_importance_;
};

// Gate-free baseline: concatenate and project 3d -> d so the downstream head
// sees the same dimension as the gated variants.
class ConcatProject : public FusionLayer {
 public:
  ConcatProject(std::string name, Index dim, Rng& init);

  std::string_view kind() const override { return "concat_project"; }
  std::vector<Param*> params() override { return proj_.params(); }
  GateDiagnostics diagnostics() const override { return {}; }
  FusionMode mode() const override { return FusionMode::NoGfm; }

 protected:
  Mat forward_impl(const Mat& x) override;
  Mat backward_impl(const Mat& grad_out) override;

 private:
  Affine proj_;
};

// Plain concatenation in (T, A, V) order.
Vec concat_fuse(const EncodedTriple& t);

std::unique_ptr<FusionLayer> make_fusion_layer(FusionMode mode, Index dim, double tau, Rng& init);

}  // namespace agfn
