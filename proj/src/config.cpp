#include "agfn/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace agfn {

SyntheticSpec ExperimentConfig::synthetic_spec() const {
  SyntheticSpec spec;
  spec.n = data_n;
  spec.seq_len = data_seq_len;
  spec.d_text = data_d_t;
  spec.d_audio = data_d_a;
  spec.d_visual = data_d_v;
  spec.noise_std = {data_noise_std_t, data_noise_std_a, data_noise_std_v};
  spec.conflict_prob = data_conflict_prob;
  spec.missing_prob = data_missing_prob;
  spec.seed = seed;
  return spec;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.lr_main = lr_main;
  t.lr_final = lr_final;
  t.batch_size = batch_size;
  t.weight_decay = weight_decay;
  t.vat_lambda = vat_lambda;
  t.vat_steps = vat_steps;
  t.vat_epsilon = vat_epsilon;
  t.vat_xi = vat_xi;
  t.clip_norm = clip_norm;
  t.max_epochs = max_epochs;
  t.patience = patience;
  t.seed = seed;
  return t;
}

ModelConfig ExperimentConfig::model_config(Index d_text, Index d_audio, Index d_visual,
                                           Index seq_len) const {
  ModelConfig m;
  m.d_text = d_text;
  m.d_audio = d_audio;
  m.d_visual = d_visual;
  m.dim = encoder_dim;
  m.seq_len = seq_len;
  m.use_attention = use_attention;
  m.fusion_mode = parse_fusion_mode(fusion_mode);
  m.tau = fusion_tau;
  return m;
}

namespace {

enum class FieldKind { U64, Int, Real, Flag, Text };

struct FieldEntry {
  const char* key;
  FieldKind kind;
  std::function<void*(ExperimentConfig&)> member;
};

const std::vector<FieldEntry>& field_registry() {
  static const std::vector<FieldEntry> entries = {
      {"seed", FieldKind::U64, [](ExperimentConfig& c) -> void* { return &c.seed; }},
      {"data.n", FieldKind::Int, [](ExperimentConfig& c) -> void* { return &c.data_n; }},
      {"data.seq_len", FieldKind::Int, [](ExperimentConfig& c) -> void* { return &c.data_seq_len; }},
      {"data.d_t", FieldKind::Int, [](ExperimentConfig& c) -> void* { return &c.data_d_t; }},
      {"data.d_a", FieldKind::Int, [](ExperimentConfig& c) -> void* { return &c.data_d_a; }},
      {"data.d_v", FieldKind::Int, [](ExperimentConfig& c) -> void* { return &c.data_d_v; }},
      {"data.noise_std_t", FieldKind::Real, [](ExperimentConfig& c) -> void* { return &c.data_noise_std_t; }},
      {"data.noise_std_a", FieldKind::Real, [](ExperimentConfig& c) -> void* { return &c.data_noise_std_a; }},
      {"data.noise_std_v", FieldKind::Real, [](ExperimentConfig& c) -> void* { return &c.data_noise_std_v; }},
      {"data.conflict_prob", FieldKind::Real, [](ExperimentConfig& c) -> void* { return &c.data_conflict_prob; }},
      {"data.missing_prob", FieldKind::Real, [](ExperimentConfig& c) -> void* { return &c.data_missing_prob; }},
      {"encoder.dim", FieldKind::Int, [](ExperimentConfig& c) -> void* { return &c.encoder_dim; }},
      {"encoder.use_attention", FieldKind::Flag, [](ExperimentConfig& c) -> void* { return &c.use_attention; }},
      {"fusion.mode", FieldKind::Text, [](ExperimentConfig& c) -> void* { return &c.fusion_mode; }},
      {"fusion.tau", FieldKind::Real, [](ExperimentConfig& c) -> void* { return &c.fusion_tau; }},
      {"train.lr_main", FieldKind::Real, [](ExperimentConfig& c) -> void* { return &c.lr_main; }},
      {"train.lr_final", FieldKind::Real, [](ExperimentConfig& c) -> void* { return &c.lr_final; }},
      {"train.batch_size", FieldKind::Int, [](ExperimentConfig& c) -> void* { return &c.batch_size; }},
      {"train.weight_decay", FieldKind::Real, [](ExperimentConfig& c) -> void* { return &c.weight_decay; }},
      {"train.vat_lambda", FieldKind::Real, [](ExperimentConfig& c) -> void* { return &c.vat_lambda; }},
      {"train.vat_steps", FieldKind::Int, [](ExperimentConfig& c) -> void* { return &c.vat_steps; }},
      {"train.vat_epsilon", FieldKind::Real, [](ExperimentConfig& c) -> void* { return &c.vat_epsilon; }},
      {"train.vat_xi", FieldKind::Real, [](ExperimentConfig& c) -> void* { return &c.vat_xi; }},
      {"train.clip_norm", FieldKind::Real, [](ExperimentConfig& c) -> void* { return &c.clip_norm; }},
      {"train.max_epochs", FieldKind::Int, [](ExperimentConfig& c) -> void* { return &c.max_epochs; }},
      {"train.patience", FieldKind::Int, [](ExperimentConfig& c) -> void* { return &c.patience; }},
      {"paths.data", FieldKind::Text, [](ExperimentConfig& c) -> void* { return &c.path_data; }},
      {"paths.model", FieldKind::Text, [](ExperimentConfig& c) -> void* { return &c.path_model; }},
      {"paths.report", FieldKind::Text, [](ExperimentConfig& c) -> void* { return &c.path_report; }},
      {"paths.embedding", FieldKind::Text, [](ExperimentConfig& c) -> void* { return &c.path_embedding; }},
  };
  return entries;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

void set_field(ExperimentConfig& cfg, const FieldEntry& entry, const std::string& value,
               const std::string& where) {
  const std::string v = trim(value);
  try {
    switch (entry.kind) {
      case FieldKind::U64: {
        std::size_t used = 0;
        *static_cast<std::uint64_t*>(entry.member(cfg)) = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        break;
      }
      case FieldKind::Int: {
        std::size_t used = 0;
        *static_cast<Index*>(entry.member(cfg)) = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        break;
      }
      case FieldKind::Real: {
        std::size_t used = 0;
        *static_cast<double*>(entry.member(cfg)) = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        break;
      }
      case FieldKind::Flag: {
        bool* flag = static_cast<bool*>(entry.member(cfg));
        if (v == "1" || v == "true") *flag = true;
        else if (v == "0" || v == "false") *flag = false;
        else throw std::invalid_argument(v);
        break;
      }
      case FieldKind::Text:
        *static_cast<std::string*>(entry.member(cfg)) = v;
        break;
    }
  } catch (const std::exception&) {
    throw ConfigError(where + ": invalid value '" + v + "' for key '" + entry.key + "'");
  }
}

std::string get_field(const ExperimentConfig& cfg, const FieldEntry& entry) {
  auto& mutable_cfg = const_cast<ExperimentConfig&>(cfg);
  char buf[48];
  switch (entry.kind) {
    case FieldKind::U64:
      std::snprintf(buf, sizeof(buf), "%llu",
                    static_cast<unsigned long long>(*static_cast<std::uint64_t*>(entry.member(mutable_cfg))));
      return buf;
    case FieldKind::Int:
      std::snprintf(buf, sizeof(buf), "%lld",
                    static_cast<long long>(*static_cast<Index*>(entry.member(mutable_cfg))));
      return buf;
    case FieldKind::Real:
      std::snprintf(buf, sizeof(buf), "%.17g", *static_cast<double*>(entry.member(mutable_cfg)));
      return buf;
    case FieldKind::Flag:
      return *static_cast<bool*>(entry.member(mutable_cfg)) ? "1" : "0";
    case FieldKind::Text:
      return *static_cast<std::string*>(entry.member(mutable_cfg));
  }
  throw std::logic_error("unreachable field kind");
}

}  // namespace

void apply_config_line(ExperimentConfig& cfg, const std::string& raw, const std::string& where) {
  const std::string line = trim(raw);
  if (line.empty() || line[0] == '#') return;
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got '" + line + "'");
  const std::string key = trim(line.substr(0, eq));
  const std::string value = line.substr(eq + 1);
  for (const FieldEntry& entry : field_registry()) {
    if (key == entry.key) {
      set_field(cfg, entry, value, where);
      return;
    }
  }
  throw ConfigError(where + ": unknown config key '" + key + "'");
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  ExperimentConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::ostringstream where;
    where << path << ":" << line_no;
    apply_config_line(cfg, line, where.str());
  }
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0)) throw ConfigError(std::string("config: ") + key + " must be positive");
  };
  auto probability = [](double v, const char* key) {
    if (v < 0.0 || v > 1.0) throw ConfigError(std::string("config: ") + key + " must lie in [0, 1]");
  };
  if (cfg.data_n < 1) throw ConfigError("config: data.n must be >= 1");
  if (cfg.data_seq_len < 1) throw ConfigError("config: data.seq_len must be >= 1");
  if (cfg.data_d_t < 2 || cfg.data_d_a < 2 || cfg.data_d_v < 2)
    throw ConfigError("config: modality dims must be >= 2");
  if (cfg.data_noise_std_t < 0.0 || cfg.data_noise_std_a < 0.0 || cfg.data_noise_std_v < 0.0)
    throw ConfigError("config: noise stds must be nonnegative");
  probability(cfg.data_conflict_prob, "data.conflict_prob");
  probability(cfg.data_missing_prob, "data.missing_prob");
  if (cfg.encoder_dim < 2) throw ConfigError("config: encoder.dim must be >= 2");
  parse_fusion_mode(cfg.fusion_mode);
  positive(cfg.fusion_tau, "fusion.tau");
  positive(cfg.lr_main, "train.lr_main");
  positive(cfg.lr_final, "train.lr_final");
  if (cfg.batch_size < 1) throw ConfigError("config: train.batch_size must be >= 1");
  if (cfg.weight_decay < 0.0) throw ConfigError("config: train.weight_decay must be nonnegative");
  if (cfg.vat_lambda < 0.0) throw ConfigError("config: train.vat_lambda must be nonnegative");
  if (cfg.vat_steps < 1) throw ConfigError("config: train.vat_steps must be >= 1");
  positive(cfg.vat_epsilon, "train.vat_epsilon");
  positive(cfg.vat_xi, "train.vat_xi");
  positive(cfg.clip_norm, "train.clip_norm");
  if (cfg.max_epochs < 1) throw ConfigError("config: train.max_epochs must be >= 1");
  if (cfg.patience < 1) throw ConfigError("config: train.patience must be >= 1");
}

std::string canonical_config(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> lines;
  for (const FieldEntry& entry : field_registry()) lines[entry.key] = get_field(cfg, entry);
  std::string out;
  for (const auto& [key, value] : lines) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_config(cfg))));
  return buf;
}

}  // namespace agfn
