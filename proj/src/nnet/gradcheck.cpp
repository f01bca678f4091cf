#include "navlab/nnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "navlab/common.hpp"

namespace navlab::nn {

namespace {

double eval_loss(const LossBuilder& build, const ParamStore& params) {
  Graph g(&params, nullptr);
  return g.scalar(build(g));
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& build, ParamStore& params, const GradCheckConfig& cfg) {
  Gradients grads(params);
  GradCheckReport report;
  {
    Graph g(&params, &grads);
    const Var loss = build(g);
    report.loss = g.scalar(loss);
    g.backward(loss);
  }
  const double floor = cfg.floor * std::max(1.0, std::abs(report.loss));
  Rng rng(derive_seed(cfg.seed, "gradcheck"));
  auto groups = params.groups();
  for (std::uint32_t gi = 0; gi < groups.size(); ++gi) {
    if (groups[gi].frozen) continue;
    // Flat index over the group's tensors, then a seeded subsample.
    std::vector<std::pair<std::uint32_t, std::size_t>> scalars;
    for (std::uint32_t pi = 0; pi < groups[gi].params.size(); ++pi) {
      for (std::size_t i = 0; i < groups[gi].params[pi].value.size(); ++i) scalars.emplace_back(pi, i);
    }
    if (scalars.size() > cfg.samples_per_group) {
      for (std::size_t k = 0; k < cfg.samples_per_group; ++k) {
        std::swap(scalars[k], scalars[k + uniform_index(rng, scalars.size() - k)]);
      }
      scalars.resize(cfg.samples_per_group);
    }
    GroupCheck gc{groups[gi].name, scalars.size(), 0.0};
    for (auto [pi, i] : scalars) {
      double& w = groups[gi].params[pi].value[i];
      const double saved = w;
      w = saved + cfg.eps;
      const double up = eval_loss(build, params);
      w = saved - cfg.eps;
      const double down = eval_loss(build, params);
      w = saved;
      const double numeric = (up - down) / (2.0 * cfg.eps);
      const double analytic = grads.get({gi, pi}, i);
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      if (rel > gc.max_rel_err) gc.max_rel_err = rel;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
        report.worst = groups[gi].name + "/" + groups[gi].params[pi].name + "[" + std::to_string(i) + "]";
      }
    }
    report.groups.push_back(gc);
  }
  report.passed = report.max_rel_err <= cfg.tolerance;
  return report;
}

}  // namespace navlab::nn
