#include "navlab/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "navlab/common.hpp"
#include "navlab/nnet/optim.hpp"

namespace navlab {

using nn::Graph;
using nn::Tensor;
using nn::Var;

std::string_view to_string(LrSchedule s) { return s == LrSchedule::Constant ? "constant" : "cosine"; }

LrSchedule parse_lr_schedule(std::string_view s) {
  if (s == "constant") return LrSchedule::Constant;
  if (s == "cosine") return LrSchedule::Cosine;
  throw ConfigError("unknown lr schedule '" + std::string(s) + "' (constant|cosine)");
}

std::string_view to_string(nn::ExpectileSign s) { return s == nn::ExpectileSign::Intent ? "intent" : "literal"; }

nn::ExpectileSign parse_expectile_sign(std::string_view s) {
  if (s == "intent") return nn::ExpectileSign::Intent;
  if (s == "literal") return nn::ExpectileSign::Literal;
  throw ConfigError("unknown expectile_sign '" + std::string(s) + "' (intent|literal)");
}

StageConfig StageConfig::defaults(int stage) {
  StageConfig c;
  c.stage = stage;
  constexpr std::array<int, 4> kEpochs{2, 3, 5, 5};
  if (stage < 0 || stage > 3) throw ConfigError("stage must be 0..3");
  c.epochs = kEpochs[static_cast<std::size_t>(stage)];
  if (stage == 0) c.lr = 1e-3;
  return c;
}

void StageConfig::validate() const {
  if (stage < 0 || stage > 3) throw ConfigError("stage must be 0..3");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0,1)");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (stop_factor < 1.0) throw ConfigError("stop_factor must be >= 1");
  if (grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0");
  reward.validate();
}

nlohmann::json StageConfig::to_json() const {
  return {{"stage", stage},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"lr", lr},
          {"schedule", to_string(schedule)},
          {"lambda", lambda},
          {"tau", tau},
          {"expectile_sign", to_string(expectile_sign)},
          {"weight", to_string(reward.weight_kind)},
          {"reward", to_string(reward.reward_kind)},
          {"stop_factor", stop_factor},
          {"grad_clip", grad_clip},
          {"seed", seed}};
}

std::vector<std::string> TrainReport::frozen_violations() const {
  std::vector<std::string> out;
  for (const auto& name : frozen_groups) {
    const auto a = checksums_before.find(name);
    const auto b = checksums_after.find(name);
    if (a == checksums_before.end() || b == checksums_after.end() || a->second != b->second) out.push_back(name);
  }
  return out;
}

std::string TrainReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,bc_loss,rtg_loss,total,grad_norm\n";
  for (const auto& e : epochs) os << e.epoch << ',' << e.bc << ',' << e.rtg << ',' << e.total << ',' << e.grad_norm << '\n';
  return os.str();
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json j;
  j["stage"] = stage;
  j["samples"] = samples;
  auto ep = nlohmann::json::array();
  for (const auto& e : epochs) {
    ep.push_back({{"epoch", e.epoch}, {"bc", e.bc}, {"rtg", e.rtg}, {"total", e.total}, {"grad_norm", e.grad_norm}});
  }
  j["epochs"] = ep;
  j["batches"] = batches.size();
  j["checksums_before"] = checksums_before;
  j["checksums_after"] = checksums_after;
  j["frozen_groups"] = frozen_groups;
  j["frozen_violations"] = frozen_violations();
  return j;
}

double reward_weight(double x, WeightKind kind) {
  switch (kind) {
    case WeightKind::Softplus:
      return nn::softplus(x);
    case WeightKind::Exp:
      return std::exp(x);
    case WeightKind::None:
      return 1.0;
  }
  return 1.0;
}

namespace {

std::vector<int> to_ints(std::span<const Action> actions) {
  std::vector<int> out;
  for (auto a : actions) out.push_back(static_cast<int>(a));
  return out;
}

}  // namespace

Var loss_bc(Graph& g, Var action_logits, const std::array<Action, kActionHorizon>& labels) {
  return g.cross_entropy(action_logits, to_ints(labels));
}

double loss_expectile(double pred, double target, double tau, nn::ExpectileSign sign) {
  return nn::expectile_loss(pred, target, tau, sign);
}

Stage1Labels stage1_labels(const StepRecord& r) {
  Stage1Labels l;
  for (int s = 0; s < kSectors; ++s) {
    l.categories[static_cast<std::size_t>(s)] = r.description.sectors[static_cast<std::size_t>(s)].nearest_category;
    l.buckets[static_cast<std::size_t>(s)] = r.description.sectors[static_cast<std::size_t>(s)].free_bucket;
  }
  l.last_action = r.description.recent_actions.empty() ? r.labels[0] : r.description.recent_actions.back();
  return l;
}

Var loss_stage1(Graph& g, const Stage1Logits& logits, const Stage1Labels& labels) {
  // Sum of per-slot cross-entropies; cross_entropy() averages rows.
  const Var sectors = g.scale(g.cross_entropy(logits.sectors, {labels.categories.begin(), labels.categories.end()}),
                              kSectors);
  const Var buckets = g.scale(g.cross_entropy(logits.buckets, {labels.buckets.begin(), labels.buckets.end()}),
                              kSectors);
  const Var action = g.cross_entropy(logits.action, {static_cast<int>(labels.last_action)});
  return g.add(g.add(sectors, buckets), action);
}

Stage3Terms loss_stage3(Graph& g, Var action_logits, const std::array<Action, kActionHorizon>& labels, Var rtg_pred,
                        const RewardLabel& label, const StageConfig& cfg) {
  const double target = cfg.reward.reward_kind == RewardKind::RTG ? label.rtg : label.r;
  Stage3Terms t;
  t.weight = reward_weight(target, cfg.reward.weight_kind);
  t.bc = loss_bc(g, action_logits, labels);
  t.rtg = g.expectile(rtg_pred, target, cfg.tau, cfg.expectile_sign);
  t.total = g.add(g.scale(t.bc, t.weight), g.scale(t.rtg, cfg.lambda));
  return t;
}

namespace {

struct SampleLoss {
  Var total;
  double bc = 0.0;
  double rtg = 0.0;
  double weight = 1.0;
};

class StageRunner {
 public:
  StageRunner(Policy& policy, std::span<const StepRecord> records, const StageConfig& cfg)
      : policy_(policy), records_(records), cfg_(cfg) {}

  TrainReport run();

 private:
  void build_caches();
  SampleLoss sample_loss(Graph& g, std::size_t i) const;
  Var map_tokens(Graph& g, std::size_t i) const;
  Var frame_tokens(Graph& g, std::size_t i) const;

  Policy& policy_;
  std::span<const StepRecord> records_;
  const StageConfig& cfg_;
  std::vector<Tensor> map_cache_;
  std::vector<Tensor> frame_cache_;
  std::vector<Tensor> feature_cache_;
};

void StageRunner::build_caches() {
  const auto& pc = policy_.config();
  const auto& ps = policy_.params();
  feature_cache_.reserve(records_.size());
  for (const auto& r : records_) feature_cache_.push_back(frame_features(r.frames, pc));
  if (ps.group(groups::kObsEncoder).frozen) {
    frame_cache_.reserve(records_.size());
    for (const auto& f : feature_cache_) {
      Graph g(&ps, nullptr);
      frame_cache_.push_back(g.value(policy_.encode_frames(g, g.input(f))));
    }
  }
  if (cfg_.stage >= 2 && ps.group(groups::kMapEncoder).frozen) {
    map_cache_.reserve(records_.size());
    for (const auto& r : records_) {
      Graph g(&ps, nullptr);
      map_cache_.push_back(g.value(policy_.encode_map(g, g.input(map_patches(r.ego_map, pc)))));
    }
  }
}

Var StageRunner::map_tokens(Graph& g, std::size_t i) const {
  if (!map_cache_.empty()) return g.input(map_cache_[i], "map_tokens");
  return policy_.encode_map(g, g.input(map_patches(records_[i].ego_map, policy_.config()), "map_patches"));
}

Var StageRunner::frame_tokens(Graph& g, std::size_t i) const {
  if (!frame_cache_.empty()) return g.input(frame_cache_[i], "frame_tokens");
  return policy_.encode_frames(g, g.input(feature_cache_[i], "frames"));
}

SampleLoss StageRunner::sample_loss(Graph& g, std::size_t i) const {
  const auto& r = records_[i];
  SampleLoss out;
  if (cfg_.stage == 0) {
    const Var recon = policy_.obs_decoder(g, frame_tokens(g, i));
    out.total = g.mse(recon, depth_targets(r.frames, policy_.config()));
    return out;
  }
  const auto f = policy_.forward_tokens(g, map_tokens(g, i), frame_tokens(g, i), r.goal);
  if (cfg_.stage == 1) {
    const auto labels = stage1_labels(r);
    const auto logits = policy_.stage1_heads(g, f);
    out.total = loss_stage1(g, logits, labels);
    out.bc = g.scalar(g.cross_entropy(logits.action, {static_cast<int>(labels.last_action)}));
    return out;
  }
  if (cfg_.stage == 2) {
    out.total = loss_bc(g, f.action_logits, r.labels);
    out.bc = g.scalar(out.total);
    return out;
  }
  const auto t = loss_stage3(g, f.action_logits, r.labels, *f.rtg, *r.reward, cfg_);
  out.total = t.total;
  out.bc = g.scalar(t.bc);
  out.rtg = g.scalar(t.rtg);
  out.weight = t.weight;
  return out;
}

TrainReport StageRunner::run() {
  const auto start = std::chrono::steady_clock::now();
  auto& ps = policy_.params();
  TrainReport report;
  report.stage = cfg_.stage;
  for (auto& g : ps.groups()) {
    report.checksums_before[g.name] = ps.checksum(g.name);
    if (g.frozen) report.frozen_groups.push_back(g.name);
    // Moments are not checkpointed, so every stage starts from zero either way.
    for (auto& p : g.params) {
      p.m.fill(0.0);
      p.v.fill(0.0);
    }
  }

  std::vector<std::size_t> base;
  if (cfg_.stage >= 2) {
    base = augment_stop_indices(records_, cfg_.stop_factor, derive_seed(cfg_.seed, "stops"));
  } else {
    base.resize(records_.size());
    std::iota(base.begin(), base.end(), std::size_t{0});
  }
  report.samples = base.size();
  build_caches();

  nn::Adam adam(nn::AdamConfig{cfg_.lr});
  const std::size_t batch = static_cast<std::size_t>(cfg_.batch_size);
  const std::size_t per_epoch = (base.size() + batch - 1) / batch;
  const std::size_t total_steps = per_epoch * static_cast<std::size_t>(cfg_.epochs);
  std::size_t step = 0;
  nn::Gradients grads(ps);

  for (int epoch = 0; epoch < cfg_.epochs && !base.empty(); ++epoch) {
    Rng rng(derive_seed(derive_seed(cfg_.seed, "shuffle"), static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order = base;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    EpochStats es;
    es.epoch = epoch;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
      const std::size_t b1 = std::min(order.size(), b0 + batch);
      const double inv = 1.0 / static_cast<double>(b1 - b0);
      grads.zero();
      BatchStats bs;
      bs.max_weight = 0.0;
      for (std::size_t k = b0; k < b1; ++k) {
        Graph g(&ps, &grads);
        const auto loss = sample_loss(g, order[k]);
        es.bc += loss.bc;
        es.rtg += loss.rtg;
        es.total += g.scalar(loss.total);
        bs.max_weight = std::max(bs.max_weight, loss.weight);
        g.backward(g.scale(loss.total, inv));
      }
      bs.grad_norm = std::sqrt(grads.squared_norm());
      if (!std::isfinite(bs.grad_norm)) throw NumericError("training: non-finite gradient norm");
      if (cfg_.grad_clip > 0.0 && bs.grad_norm > cfg_.grad_clip) grads.scale(cfg_.grad_clip / bs.grad_norm);
      double lr = cfg_.lr;
      if (cfg_.schedule == LrSchedule::Cosine && total_steps > 0) {
        lr = 0.5 * cfg_.lr * (1.0 + std::cos(M_PI * static_cast<double>(step) / static_cast<double>(total_steps)));
      }
      adam.step(ps, grads, lr);
      ++step;
      es.grad_norm += bs.grad_norm;
      report.batches.push_back(bs);
    }
    const double n = static_cast<double>(order.size());
    es.bc /= n;
    es.rtg /= n;
    es.total /= n;
    es.grad_norm /= static_cast<double>(per_epoch);
    report.epochs.push_back(es);
  }

  for (const auto& g : ps.groups()) report.checksums_after[g.name] = ps.checksum(g.name);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace

TrainReport run_stage(Policy& policy, std::span<const StepRecord> records, const StageConfig& cfg) {
  cfg.validate();
  if (cfg.stage == 3) {
    for (const auto& r : records) {
      if (!r.reward) throw ConfigError("stage 3 needs reward labels; run `label` first");
    }
  }
  if (cfg.stage == 0) policy.add_obs_decoder(derive_seed(cfg.seed, "init"));
  if (cfg.stage == 1) policy.add_stage1_heads(derive_seed(cfg.seed, "init"));
  if (cfg.stage == 3) policy.add_reward_head(derive_seed(cfg.seed, "init"));
  policy.apply_freeze(cfg.stage);

  auto report = StageRunner(policy, records, cfg).run();

  if (cfg.stage == 0) policy.drop_group(groups::kObsDecoder);
  if (cfg.stage == 1) policy.drop_group(groups::kStage1Heads);
  return report;
}

}  // namespace navlab

namespace navlab {

StepRecord make_probe_record(std::uint64_t seed, const WorldConfig& world_cfg, const EpisodeConfig& episode) {
  const World world = generate_world(seed, world_cfg);
  const auto cats = world.goal_categories();
  const int goal = cats[static_cast<std::size_t>(derive_seed(seed, "goal") % cats.size())];
  const auto ep = run_policy_episode(world, goal, DemoKind::Frontier, derive_seed(seed, "episode"), episode);
  auto records = chunk_steps(ep, 0);
  RewardConfig rc;
  label_episode(records, rc);
  // A mid-episode step sees a non-trivial map and history.
  return records[records.size() / 2];
}

nn::GradCheckReport policy_grad_check(Policy& policy, const StepRecord& sample, const nn::GradCheckConfig& cfg) {
  if (!sample.reward) throw ConfigError("gradcheck: sample needs reward labels");
  policy.add_obs_decoder(cfg.seed);
  policy.add_stage1_heads(cfg.seed);
  policy.add_reward_head(cfg.seed);
  for (auto& g : policy.params().groups()) g.frozen = false;
  StageConfig sc = StageConfig::defaults(3);
  const auto labels = stage1_labels(sample);
  const auto depth = depth_targets(sample.frames, policy.config());
  auto build = [&](Graph& g) {
    const auto f = policy.forward(g, sample.ego_map, sample.frames, sample.goal);
    const Var recon = g.mse(policy.obs_decoder(g, f.frame_tokens), depth);
    const Var s1 = loss_stage1(g, policy.stage1_heads(g, f), labels);
    const auto s3 = loss_stage3(g, f.action_logits, sample.labels, *f.rtg, *sample.reward, sc);
    return g.add(g.add(recon, s1), s3.total);
  };
  return nn::grad_check(build, policy.params(), cfg);
}

}  // namespace navlab
