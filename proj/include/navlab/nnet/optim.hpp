#pragma once

#include <cstdint>

#include "navlab/nnet/params.hpp"

namespace navlab::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments live in the Parameters themselves,
/// so a checkpoint round trip keeps values but resets the step counter.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {});

  /// Updates every non-frozen tensor that has a gradient slot. `lr` < 0
  /// means use the configured rate.
  void step(ParamStore& params, const Gradients& grads, double lr = -1.0);
  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
};

}  // namespace navlab::nn
