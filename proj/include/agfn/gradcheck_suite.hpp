#pragma once

#include "agfn/autograd.hpp"

#include <string>
#include <vector>

namespace agfn {

struct LayerCheckResult {
  std::string kind;
  double max_rel_error = 0.0;
  Index instances = 0;
};

inline constexpr double kGradCheckTolerance = 1e-4;

// Runs grad_check over every layer type in the repository plus the composed
// model, `instances` random (params, input) draws each. inject_fault adds a
// deliberately corrupted layer so failure detection itself can be exercised.
std::vector<LayerCheckResult> run_grad_check_suite(Index instances, std::uint64_t seed,
                                                   bool inject_fault = false);

}  // namespace agfn
