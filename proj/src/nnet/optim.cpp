#include "navlab/nnet/optim.hpp"

#include <cmath>

#include "navlab/common.hpp"

namespace navlab::nn {

Adam::Adam(AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg_.lr > 0.0)) throw ConfigError("adam: lr must be positive");
  if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0) {
    throw ConfigError("adam: betas must lie in [0,1)");
  }
}

void Adam::step(ParamStore& params, const Gradients& grads, double lr) {
  if (lr < 0.0) lr = cfg_.lr;
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto groups = params.groups();
  for (std::uint32_t gi = 0; gi < groups.size(); ++gi) {
    if (groups[gi].frozen) continue;
    for (std::uint32_t pi = 0; pi < groups[gi].params.size(); ++pi) {
      const Tensor* g = grads.slot({gi, pi});
      if (!g) continue;
      auto& p = groups[gi].params[pi];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double gv = (*g)[i];
        p.m[i] = cfg_.beta1 * p.m[i] + (1.0 - cfg_.beta1) * gv;
        p.v[i] = cfg_.beta2 * p.v[i] + (1.0 - cfg_.beta2) * gv * gv;
        p.value[i] -= lr * (p.m[i] / c1) / (std::sqrt(p.v[i] / c2) + cfg_.eps);
      }
    }
  }
}

}  // namespace navlab::nn
