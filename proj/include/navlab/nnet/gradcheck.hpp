#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "navlab/nnet/graph.hpp"

namespace navlab::nn {

struct GradCheckConfig {
  double eps = 1e-5;
  std::size_t samples_per_group = 200;  // every scalar when a group is smaller
  double tolerance = 1e-4;
  /// Denominator floor of the relative error, as a fraction of max(1, |loss|).
  /// Gradients below it are compared on an absolute scale; this keeps the
  /// test invariant to rescaling the loss.
  double floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GroupCheck {
  std::string group;
  std::size_t checked = 0;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GroupCheck> groups;
  double max_rel_err = 0.0;
  std::string worst;  // "group/tensor[i]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  double loss = 0.0;
  bool passed = false;
};

/// Builds the scalar loss on a fresh graph. Called once for the analytic
/// pass and twice per checked scalar.
using LossBuilder = std::function<Var(Graph&)>;

/// Central differences against reverse-mode gradients for every non-frozen
/// group. Parameter values are restored bit-exactly afterwards.
GradCheckReport grad_check(const LossBuilder& build, ParamStore& params, const GradCheckConfig& cfg = {});

}  // namespace navlab::nn
