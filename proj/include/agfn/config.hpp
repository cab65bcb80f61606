#pragma once

#include "agfn/data.hpp"
#include "agfn/model.hpp"
#include "agfn/train.hpp"

#include <string>

namespace agfn {

// Flat key=value experiment configuration with '#' comments and dotted
// namespaces. Unknown keys are rejected; every key has a default, so an empty
// file is valid. config_hash is the FNV-1a digest of the canonicalized
// (sorted key=value) form, computed after CLI overrides.
struct ExperimentConfig {
  std::uint64_t seed = 1111;

  // synthetic data generation
  Index data_n = 1000;
  Index data_seq_len = 4;
  Index data_d_t = 16;
  Index data_d_a = 16;
  Index data_d_v = 16;
  double data_noise_std_t = 0.1;
  double data_noise_std_a = 0.1;
  double data_noise_std_v = 0.1;
  double data_conflict_prob = 0.0;
  double data_missing_prob = 0.0;

  // architecture
  Index encoder_dim = 32;
  bool use_attention = true;
  std::string fusion_mode = "full";
  double fusion_tau = 1.0;

  // optimization
  double lr_main = 1e-4;
  double lr_final = 1e-6;
  Index batch_size = 32;
  double weight_decay = 0.01;
  double vat_lambda = 0.1;
  Index vat_steps = 5;
  double vat_epsilon = 1.0;
  double vat_xi = 1e-6;
  double clip_norm = 1.0;
  Index max_epochs = 100;
  Index patience = 8;

  // file locations
  std::string path_data = "features.csv";
  std::string path_model = "model.agfn";
  std::string path_report = "report.txt";
  std::string path_embedding = "embedding.csv";

  SyntheticSpec synthetic_spec() const;
  TrainConfig train_config() const;
  // Model dimensions come from the dataset at hand; architecture from here.
  ModelConfig model_config(Index d_text, Index d_audio, Index d_visual, Index seq_len) const;
};

ExperimentConfig parse_config_file(const std::string& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& line, const std::string& where);
void validate_config(const ExperimentConfig& cfg);

std::string canonical_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace agfn
