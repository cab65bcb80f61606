#pragma once

#include "agfn/data.hpp"
#include "agfn/fusion.hpp"

#include <memory>
#include <optional>

namespace agfn {

// Regression head f: affine d -> hidden, tanh, affine hidden -> 1. Exposes the
// pure ScalarField surface on top of the cached Layer path; both run the same
// affine/tanh primitives.
class PredictionHead : public Layer, public ScalarField {
 public:
  PredictionHead(std::string name, Index in_dim, Index hidden, Rng& init);

  std::string_view kind() const override { return "prediction_head"; }
  std::vector<Param*> params() override;

  double value(const Vec& u) const override;
  Vec vjp(const Vec& u, double dy, bool accumulate_param_grads) override;

  Index in_dim() const { return a1_.in_dim(); }

 protected:
  Mat forward_impl(const Mat& x) override;
  Mat backward_impl(const Mat& grad_out) override;

 private:
  Affine a1_;
  Affine a2_;
  Vec cached_input_;
};

struct ModelConfig {
  Index d_text = 16;
  Index d_audio = 16;
  Index d_visual = 16;
  Index dim = 32;       // shared encoder output dimension
  Index seq_len = 4;    // sequence length expected by the attention stage
  bool use_attention = true;
  FusionMode fusion_mode = FusionMode::Full;
  double tau = 1.0;
  Index head_hidden = 32;
};

// Full pipeline: (optional) cross-modal attention -> unimodal encoders ->
// fusion variant -> prediction head. Single-threaded; forward caches state
// consumed by the matching backward.
class AgfnModel {
 public:
  AgfnModel(const ModelConfig& cfg, Rng& init);

  struct Forward {
    double prediction = 0.0;
    Vec fused;
    EncodedTriple encoded;
    GateDiagnostics diagnostics;
  };
  Forward forward(const ModalityBundle& b);

  struct InputGrads {
    Mat text;
    Mat audio;
    Mat visual;
  };
  // extra_d_fused adds a gradient arriving directly at the fused vector
  // (the adversarial consistency term); pass an empty Vec when unused.
  InputGrads backward(double d_prediction, const Vec& extra_d_fused = Vec());

  std::vector<Param*> params();
  std::vector<Param*> trainable_params();
  void zero_grads();

  PredictionHead& head() { return *head_; }
  FusionLayer& fusion() { return *fusion_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  std::unique_ptr<CrossAttention> attn_text_, attn_audio_, attn_visual_;
  std::unique_ptr<Encoder> enc_text_, enc_audio_, enc_visual_;
  std::unique_ptr<FusionLayer> fusion_;
  std::unique_ptr<PredictionHead> head_;
  Index last_seq_rows_ = 0;
};

// Versioned text container: '#agfn-model v1', reconstruction metadata,
// then per-parameter name/shape/row-major values at full precision.
void save_model(const AgfnModel& model, const std::string& config_hash, const std::string& path);

struct LoadedModel {
  ModelConfig config;
  std::string config_hash;
  std::unique_ptr<AgfnModel> model;
};
LoadedModel load_model(const std::string& path);

}  // namespace agfn
