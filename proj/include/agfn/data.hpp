#pragma once

#include "agfn/rng.hpp"
#include "agfn/types.hpp"

#include <array>
#include <string>
#include <vector>

namespace agfn {

// One sample: per-modality feature sequences plus the continuous label.
// conflict/missing record what the generator did (-1 = untouched); loaded
// files carry no such metadata.
struct ModalityBundle {
  std::string sample_id;
  Mat text;
  Mat audio;
  Mat visual;
  double label = 0.0;
  int conflict_modality = -1;
  int missing_modality = -1;
};

struct Dataset {
  std::vector<ModalityBundle> samples;
  Index d_text = 0;
  Index d_audio = 0;
  Index d_visual = 0;
  Index seq_len = 0;
  std::string provenance;

  Index size() const { return static_cast<Index>(samples.size()); }
};

struct SyntheticSpec {
  Index n = 1000;
  Index seq_len = 4;
  Index d_text = 16;
  Index d_audio = 16;
  Index d_visual = 16;
  std::array<double, 3> noise_std = {0.1, 0.1, 0.1};  // (T, A, V)
  double conflict_prob = 0.0;
  double missing_prob = 0.0;
  std::uint64_t seed = 1111;
};

// Latent-score generator: each sample draws s ~ U[-3,3]; every sequence row of
// modality m is s * u_m + N(0, noise_std_m) for a per-dataset random unit
// direction u_m. With probability conflict_prob one modality flips the sign of
// s; otherwise with probability missing_prob one modality is zeroed. A sample
// never receives both corruptions. label = s.
Dataset generate(const SyntheticSpec& spec);

struct SplitView {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
};

// Seeded shuffle, then contiguous 70/10/20 partition
// (floor(0.7n), floor(0.1n), remainder). Requires n >= 10.
SplitView split(const Dataset& ds, std::uint64_t seed);

Dataset subset(const Dataset& ds, const std::vector<Index>& indices);

// Feature-file format, line 1:
//   #agfn-features v1 dT=<int> dA=<int> dV=<int> seq=<int>
// then one CSV line per sample:
//   sample_id,label,<seq*dT text>,<seq*dA audio>,<seq*dV visual>
// Values serialized at 12 significant digits, UTF-8, '\n' endings.
void save_csv(const Dataset& ds, const std::string& path);
Dataset load_csv(const std::string& path);

}  // namespace agfn
