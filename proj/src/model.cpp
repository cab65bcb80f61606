#include "agfn/model.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace agfn {

PredictionHead::PredictionHead(std::string name, Index in_dim, Index hidden, Rng& init)
    : a1_(name + ".1", in_dim, hidden, init), a2_(name + ".2", hidden, 1, init) {}

std::vector<Param*> PredictionHead::params() {
  auto p = a1_.params();
  for (Param* q : a2_.params()) p.push_back(q);
  return p;
}

double PredictionHead::value(const Vec& u) const {
  const Mat x = u.transpose();
  return a2_.value(TanhLayer::value(a1_.value(x)))(0, 0);
}

Vec PredictionHead::vjp(const Vec& u, double dy, bool accumulate_param_grads) {
  const Mat x = u.transpose();
  const Mat hidden = TanhLayer::value(a1_.value(x));
  const Mat d_hidden = a2_.vjp(hidden, Mat::Constant(1, 1, dy), accumulate_param_grads);
  const Mat d_pre = (d_hidden.array() * (1.0 - hidden.array().square())).matrix();
  return a1_.vjp(x, d_pre, accumulate_param_grads).row(0).transpose();
}

Mat PredictionHead::forward_impl(const Mat& x) {
  require_shape(x.rows() == 1 && x.cols() == a1_.in_dim(), "prediction_head: expected 1 x d input");
  cached_input_ = x.row(0).transpose();
  return Mat::Constant(1, 1, value(cached_input_));
}

Mat PredictionHead::backward_impl(const Mat& grad_out) {
  return vjp(cached_input_, grad_out(0, 0), /*accumulate_param_grads=*/true).transpose();
}

namespace {

Mat vstack(const Mat& a, const Mat& b) {
  require_shape(a.cols() == b.cols(), "vstack: column mismatch");
  Mat out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

void validate_model_config(const ModelConfig& cfg) {
  if (cfg.dim < 2) throw ConfigError("model: encoder.dim must be >= 2");
  if (cfg.head_hidden < 1) throw ConfigError("model: head hidden width must be >= 1");
  if (cfg.d_text < 1 || cfg.d_audio < 1 || cfg.d_visual < 1)
    throw ConfigError("model: modality dims must be >= 1");
  if (cfg.tau <= 0.0) throw ConfigError("model: fusion.tau must be positive");
  if (cfg.use_attention) {
    if (cfg.d_text != cfg.d_audio || cfg.d_text != cfg.d_visual)
      throw ConfigError("model: cross-modal attention requires equal modality dims");
    if (cfg.seq_len < 1) throw ConfigError("model: seq_len must be >= 1 with attention enabled");
  }
}

}  // namespace

AgfnModel::AgfnModel(const ModelConfig& cfg, Rng& init) : cfg_(cfg) {
  validate_model_config(cfg_);
  if (cfg_.use_attention) {
    attn_text_ = std::make_unique<CrossAttention>("attn_t", cfg_.d_text, cfg_.seq_len, init);
    attn_audio_ = std::make_unique<CrossAttention>("attn_a", cfg_.d_audio, cfg_.seq_len, init);
    attn_visual_ = std::make_unique<CrossAttention>("attn_v", cfg_.d_visual, cfg_.seq_len, init);
  }
  enc_text_ = std::make_unique<Encoder>("enc_t", cfg_.d_text, cfg_.dim, init);
  enc_audio_ = std::make_unique<Encoder>("enc_a", cfg_.d_audio, cfg_.dim, init);
  enc_visual_ = std::make_unique<Encoder>("enc_v", cfg_.d_visual, cfg_.dim, init);
  fusion_ = make_fusion_layer(cfg_.fusion_mode, cfg_.dim, cfg_.tau, init);
  head_ = std::make_unique<PredictionHead>("head", cfg_.dim, cfg_.head_hidden, init);
}

AgfnModel::Forward AgfnModel::forward(const ModalityBundle& b) {
  require_shape(b.text.cols() == cfg_.d_text && b.audio.cols() == cfg_.d_audio &&
                    b.visual.cols() == cfg_.d_visual,
                "model: bundle dims do not match the model");
  require_shape(b.text.rows() >= 1 && b.audio.rows() >= 1 && b.visual.rows() >= 1,
                "model: empty sequence");

  Mat text_in = b.text;
  Mat audio_in = b.audio;
  Mat visual_in = b.visual;
  if (cfg_.use_attention) {
    require_shape(b.text.rows() == cfg_.seq_len && b.audio.rows() == cfg_.seq_len &&
                      b.visual.rows() == cfg_.seq_len,
                  "model: attention expects fixed-length sequences");
    // All three refinements read the unrefined inputs.
    text_in = attn_text_->attend(b.text, vstack(b.audio, b.visual));
    audio_in = attn_audio_->attend(b.audio, vstack(b.text, b.visual));
    visual_in = attn_visual_->attend(b.visual, vstack(b.text, b.audio));
  }
  last_seq_rows_ = b.text.rows();

  const Mat h_text = enc_text_->forward(text_in);
  const Mat h_audio = enc_audio_->forward(audio_in);
  const Mat h_visual = enc_visual_->forward(visual_in);

  Mat triple(3, cfg_.dim);
  triple.row(0) = h_text.row(0);
  triple.row(1) = h_audio.row(0);
  triple.row(2) = h_visual.row(0);

  const Mat fused = fusion_->forward(triple);
  const double pred = head_->forward(fused)(0, 0);

  Forward out;
  out.prediction = pred;
  out.fused = fused.row(0).transpose();
  out.encoded = EncodedTriple::from_packed(triple);
  out.diagnostics = fusion_->diagnostics();
  return out;
}

AgfnModel::InputGrads AgfnModel::backward(double d_prediction, const Vec& extra_d_fused) {
  Mat d_fused = head_->backward(Mat::Constant(1, 1, d_prediction));
  if (extra_d_fused.size() > 0) {
    require_shape(extra_d_fused.size() == cfg_.dim, "model: extra fused gradient has wrong size");
    d_fused.row(0) += extra_d_fused.transpose();
  }

  const Mat d_triple = fusion_->backward(d_fused);
  const Mat d_text_ref = enc_text_->backward(d_triple.row(0));
  const Mat d_audio_ref = enc_audio_->backward(d_triple.row(1));
  const Mat d_visual_ref = enc_visual_->backward(d_triple.row(2));

  InputGrads g;
  if (!cfg_.use_attention) {
    g.text = d_text_ref;
    g.audio = d_audio_ref;
    g.visual = d_visual_ref;
    return g;
  }

  const Index rows = last_seq_rows_;
  auto [dq_t, dkv_t] = attn_text_->attend_backward(d_text_ref);    // kv = (audio, visual)
  auto [dq_a, dkv_a] = attn_audio_->attend_backward(d_audio_ref);  // kv = (text, visual)
  auto [dq_v, dkv_v] = attn_visual_->attend_backward(d_visual_ref);  // kv = (text, audio)

  g.text = dq_t + dkv_a.topRows(rows) + dkv_v.topRows(rows);
  g.audio = dq_a + dkv_t.topRows(rows) + dkv_v.bottomRows(rows);
  g.visual = dq_v + dkv_t.bottomRows(rows) + dkv_a.bottomRows(rows);
  return g;
}

std::vector<Param*> AgfnModel::params() {
  std::vector<Param*> out;
  auto add = [&out](std::vector<Param*> ps) {
    for (Param* p : ps) out.push_back(p);
  };
  if (cfg_.use_attention) {
    add(attn_text_->params());
    add(attn_audio_->params());
    add(attn_visual_->params());
  }
  add(enc_text_->params());
  add(enc_audio_->params());
  add(enc_visual_->params());
  add(fusion_->params());
  add(head_->params());
  return out;
}

std::vector<Param*> AgfnModel::trainable_params() {
  std::vector<Param*> out;
  for (Param* p : params())
    if (p->trainable) out.push_back(p);
  return out;
}

void AgfnModel::zero_grads() {
  for (Param* p : params()) p->zero_grad();
}

namespace {

void format_g17(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

void save_model(const AgfnModel& model, const std::string& config_hash, const std::string& path) {
  auto& mutable_model = const_cast<AgfnModel&>(model);  // params() is non-const only
  const ModelConfig& cfg = model.config();

  std::string buf = "#agfn-model v1\n";
  buf += "config_hash=" + config_hash + "\n";
  buf += "fusion.mode=" + to_string(cfg.fusion_mode) + "\n";
  buf += "fusion.tau=";
  format_g17(buf, cfg.tau);
  buf += "\n";
  auto int_line = [&buf](const char* key, Index v) {
    buf += key;
    buf += '=';
    buf += std::to_string(static_cast<long long>(v));
    buf += '\n';
  };
  int_line("encoder.dim", cfg.dim);
  int_line("encoder.use_attention", cfg.use_attention ? 1 : 0);
  int_line("encoder.head_hidden", cfg.head_hidden);
  int_line("data.d_t", cfg.d_text);
  int_line("data.d_a", cfg.d_audio);
  int_line("data.d_v", cfg.d_visual);
  int_line("data.seq_len", cfg.seq_len);

  const auto params = mutable_model.params();
  int_line("params", static_cast<Index>(params.size()));
  for (const Param* p : params) {
    buf += "param " + p->name + " " + std::to_string(p->value.rows()) + " " +
           std::to_string(p->value.cols()) + "\n";
    for (Index i = 0; i < p->value.rows(); ++i) {
      for (Index j = 0; j < p->value.cols(); ++j) {
        if (j) buf += ' ';
        format_g17(buf, p->value(i, j));
      }
      buf += '\n';
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_model: cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("save_model: write to '" + path + "' failed");
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_model: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || line != "#agfn-model v1")
    throw DataError("load_model: '" + path + "' is not an agfn model file (bad magic)");

  std::map<std::string, std::string> meta;
  long long param_count = -1;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("load_model: malformed header line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "params") {
      param_count = std::stoll(value);
      break;
    }
    meta[key] = value;
  }
  if (param_count < 0) throw DataError("load_model: missing params section");

  auto require_key = [&meta, &path](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("load_model: " + path + " missing header key '" + key + "'");
    return it->second;
  };

  LoadedModel loaded;
  loaded.config_hash = require_key("config_hash");
  ModelConfig cfg;
  cfg.fusion_mode = parse_fusion_mode(require_key("fusion.mode"));
  cfg.tau = std::stod(require_key("fusion.tau"));
  cfg.dim = std::stoll(require_key("encoder.dim"));
  cfg.use_attention = require_key("encoder.use_attention") == "1";
  cfg.head_hidden = std::stoll(require_key("encoder.head_hidden"));
  cfg.d_text = std::stoll(require_key("data.d_t"));
  cfg.d_audio = std::stoll(require_key("data.d_a"));
  cfg.d_visual = std::stoll(require_key("data.d_v"));
  cfg.seq_len = std::stoll(require_key("data.seq_len"));
  loaded.config = cfg;

  Rng init(0);
  loaded.model = std::make_unique<AgfnModel>(cfg, init);

  std::map<std::string, Param*> by_name;
  for (Param* p : loaded.model->params()) by_name[p->name] = p;
  if (static_cast<long long>(by_name.size()) != param_count)
    throw DataError("load_model: parameter count mismatch in '" + path + "'");

  for (long long k = 0; k < param_count; ++k) {
    if (!std::getline(in, line)) throw DataError("load_model: truncated parameter section");
    std::istringstream hdr(line);
    std::string tag, name;
    long long rows = 0, cols = 0;
    hdr >> tag >> name >> rows >> cols;
    if (tag != "param" || name.empty() || rows < 1 || cols < 1)
      throw DataError("load_model: malformed parameter header '" + line + "'");
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("load_model: unknown parameter '" + name + "'");
    Param& p = *it->second;
    if (p.value.rows() != rows || p.value.cols() != cols)
      throw DataError("load_model: shape mismatch for parameter '" + name + "'");
    for (long long i = 0; i < rows; ++i) {
      if (!std::getline(in, line)) throw DataError("load_model: truncated values for '" + name + "'");
      std::istringstream vals(line);
      for (long long j = 0; j < cols; ++j) {
        if (!(vals >> p.value(i, j)))
          throw DataError("load_model: malformed values for '" + name + "'");
      }
    }
  }
  return loaded;
}

}  // namespace agfn
