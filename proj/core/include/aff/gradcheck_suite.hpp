#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aff {

struct SuiteResult {
  std::string name;
  double max_rel_err = 0.0;
  double score_grad_norm = -1.0;  // >= 0 only for checks that track l's weights
};

/// Finite-difference verification of every differentiable op plus the
/// composed losses: one attention block, one neighborhood merge, and the
/// full small-model classification on a 16x16 image. 64-bit throughout.
std::vector<SuiteResult> run_gradcheck_suite(std::uint64_t seed);

}  // namespace aff
