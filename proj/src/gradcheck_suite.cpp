#include "agfn/gradcheck_suite.hpp"

#include "agfn/model.hpp"

#include <functional>
#include <memory>

namespace agfn {

namespace {

// Presents the whole pipeline (attention -> encoders -> fusion -> head) as a
// single layer: the input packs the three equal-width sequences row-wise.
class ModelLayerAdapter : public Layer {
 public:
  ModelLayerAdapter(const ModelConfig& cfg, Rng& init) : model_(cfg, init) {}

  std::string_view kind() const override { return "agfn_model"; }
  std::vector<Param*> params() override { return model_.params(); }

 protected:
  Mat forward_impl(const Mat& x) override {
    const Index rows = model_.config().seq_len;
    require_shape(x.rows() == 3 * rows, "agfn_model adapter: expected 3*seq_len packed rows");
    ModalityBundle b;
    b.text = x.topRows(rows);
    b.audio = x.middleRows(rows, rows);
    b.visual = x.bottomRows(rows);
    return Mat::Constant(1, 1, model_.forward(b).prediction);
  }

  Mat backward_impl(const Mat& grad_out) override {
    const auto grads = model_.backward(grad_out(0, 0));
    Mat packed(grads.text.rows() + grads.audio.rows() + grads.visual.rows(), grads.text.cols());
    packed.topRows(grads.text.rows()) = grads.text;
    packed.middleRows(grads.text.rows(), grads.audio.rows()) = grads.audio;
    packed.bottomRows(grads.visual.rows()) = grads.visual;
    return packed;
  }

 private:
  AgfnModel model_;
};

// Off-by-a-constant input gradient; grad_check must flag it.
class CorruptedAffine : public Affine {
 public:
  using Affine::Affine;
  std::string_view kind() const override { return "fault_injection"; }

 protected:
  Mat backward_impl(const Mat& grad_out) override {
    Mat g = Affine::backward_impl(grad_out);
    g(0, 0) += 0.5;
    return g;
  }
};

void randomize_params(Layer& layer, Rng& rng) {
  for (Param* p : layer.params())
    p->value = rng.uniform_matrix(p->value.rows(), p->value.cols(), -0.8, 0.8);
}

struct Case {
  std::string kind;
  std::function<std::pair<std::unique_ptr<Layer>, Mat>(Rng&)> make;
};

std::vector<Case> build_cases() {
  std::vector<Case> cases;

  cases.push_back({"affine", [](Rng& rng) {
                     const Index in = 2 + rng.index(5), out = 1 + rng.index(5), rows = 1 + rng.index(4);
                     auto layer = std::make_unique<Affine>("p", in, out, rng);
                     return std::pair<std::unique_ptr<Layer>, Mat>(std::move(layer),
                                                                   rng.gaussian_matrix(rows, in));
                   }});
  cases.push_back({"tanh", [](Rng& rng) {
                     const Index rows = 1 + rng.index(3), cols = 2 + rng.index(5);
                     return std::pair<std::unique_ptr<Layer>, Mat>(std::make_unique<TanhLayer>(),
                                                                   rng.gaussian_matrix(rows, cols));
                   }});
  cases.push_back({"mean_pool", [](Rng& rng) {
                     const Index rows = 1 + rng.index(5), cols = 2 + rng.index(5);
                     return std::pair<std::unique_ptr<Layer>, Mat>(std::make_unique<MeanPool>(),
                                                                   rng.gaussian_matrix(rows, cols));
                   }});
  cases.push_back({"encoder", [](Rng& rng) {
                     const Index in = 2 + rng.index(5), out = 2 + rng.index(5), rows = 1 + rng.index(5);
                     auto layer = std::make_unique<Encoder>("e", in, out, rng);
                     return std::pair<std::unique_ptr<Layer>, Mat>(std::move(layer),
                                                                   rng.gaussian_matrix(rows, in));
                   }});
  cases.push_back({"cross_attention", [](Rng& rng) {
                     const Index d = 2 + rng.index(5), lq = 1 + rng.index(4), lk = 1 + rng.index(4);
                     auto layer = std::make_unique<CrossAttention>("a", d, lq, rng);
                     return std::pair<std::unique_ptr<Layer>, Mat>(std::move(layer),
                                                                   rng.gaussian_matrix(lq + lk, d));
                   }});
  cases.push_back({"entropy_gate", [](Rng& rng) {
                     const Index d = 2 + rng.index(5);
                     auto layer = std::make_unique<EntropyGate>("f", d, 0.5 + rng.uniform01() * 1.5, rng);
                     return std::pair<std::unique_ptr<Layer>, Mat>(std::move(layer),
                                                                   rng.gaussian_matrix(3, d));
                   }});
  cases.push_back({"importance_gate", [](Rng& rng) {
                     const Index d = 2 + rng.index(5);
                     auto layer = std::make_unique<ImportanceGate>("f", d, rng);
                     return std::pair<std::unique_ptr<Layer>, Mat>(std::move(layer),
                                                                   rng.gaussian_matrix(3, d));
                   }});
  cases.push_back({"adaptive_fuse", [](Rng& rng) {
                     const Index d = 2 + rng.index(5);
                     auto layer = std::make_unique<AdaptiveFuse>("f", d, 0.5 + rng.uniform01() * 1.5, rng);
                     return std::pair<std::unique_ptr<Layer>, Mat>(std::move(layer),
                                                                   rng.gaussian_matrix(3, d));
                   }});
  cases.push_back({"concat_project", [](Rng& rng) {
                     const Index d = 2 + rng.index(5);
                     auto layer = std::make_unique<ConcatProject>("f", d, rng);
                     return std::pair<std::unique_ptr<Layer>, Mat>(std::move(layer),
                                                                   rng.gaussian_matrix(3, d));
                   }});
  cases.push_back({"prediction_head", [](Rng& rng) {
                     const Index d = 2 + rng.index(5), hidden = 2 + rng.index(7);
                     auto layer = std::make_unique<PredictionHead>("h", d, hidden, rng);
                     return std::pair<std::unique_ptr<Layer>, Mat>(std::move(layer),
                                                                   rng.gaussian_matrix(1, d));
                   }});
  cases.push_back({"agfn_model", [](Rng& rng) {
                     ModelConfig cfg;
                     cfg.d_text = cfg.d_audio = cfg.d_visual = 2 + rng.index(4);
                     cfg.dim = 3 + rng.index(4);
                     cfg.seq_len = 1 + rng.index(3);
                     cfg.use_attention = true;
                     cfg.fusion_mode = FusionMode::Full;
                     cfg.tau = 0.5 + rng.uniform01() * 1.5;
                     cfg.head_hidden = 3 + rng.index(6);
                     auto layer = std::make_unique<ModelLayerAdapter>(cfg, rng);
                     return std::pair<std::unique_ptr<Layer>, Mat>(
                         std::move(layer), rng.gaussian_matrix(3 * cfg.seq_len, cfg.d_text));
                   }});
  return cases;
}

}  // namespace

std::vector<LayerCheckResult> run_grad_check_suite(Index instances, std::uint64_t seed,
                                                   bool inject_fault) {
  std::vector<LayerCheckResult> results;
  Rng rng(seed);

  for (const Case& c : build_cases()) {
    LayerCheckResult r;
    r.kind = c.kind;
    r.instances = instances;
    for (Index k = 0; k < instances; ++k) {
      auto [layer, input] = c.make(rng);
      randomize_params(*layer, rng);
      const GradReport report = grad_check(*layer, input, rng);
      r.max_rel_error = std::max(r.max_rel_error, report.worst());
    }
    results.push_back(std::move(r));
  }

  if (inject_fault) {
    LayerCheckResult r;
    r.kind = "fault_injection";
    r.instances = 1;
    CorruptedAffine corrupted("bad", 3, 3, rng);
    const GradReport report = grad_check(corrupted, rng.gaussian_matrix(2, 3), rng);
    r.max_rel_error = report.worst();
    results.push_back(std::move(r));
  }

  return results;
}

}  // namespace agfn
