#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "navlab/demogen.hpp"
#include "navlab/nnet/gradcheck.hpp"
#include "navlab/nnet/graph.hpp"
#include "navlab/policy.hpp"
#include "navlab/rewards.hpp"

namespace navlab {

enum class LrSchedule { Constant, Cosine };

std::string_view to_string(LrSchedule s);
LrSchedule parse_lr_schedule(std::string_view s);
std::string_view to_string(nn::ExpectileSign s);
nn::ExpectileSign parse_expectile_sign(std::string_view s);

struct StageConfig {
  int stage = 2;
  int epochs = 5;
  int batch_size = 64;
  double lr = 3e-4;
  LrSchedule schedule = LrSchedule::Constant;
  double lambda = 1.0;
  double tau = 0.9;
  nn::ExpectileSign expectile_sign = nn::ExpectileSign::Intent;
  RewardConfig reward{};
  double stop_factor = 2.0;  // stop augmentation for stages 2-3; 1 disables
  double grad_clip = 0.0;    // global-norm clip; 0 disables
  std::uint64_t seed = 0;

  /// Defaults: epochs 2/3/5/5 for stages 0-3.
  static StageConfig defaults(int stage);
  void validate() const;
  nlohmann::json to_json() const;
};

struct EpochStats {
  int epoch = 0;
  double bc = 0.0;
  double rtg = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;  // mean over batches
};

struct BatchStats {
  double grad_norm = 0.0;
  double max_weight = 0.0;  // largest per-sample BC weight in the batch (1 outside stage 3)
};

struct TrainReport {
  int stage = 0;
  std::size_t samples = 0;
  std::vector<EpochStats> epochs;
  std::vector<BatchStats> batches;
  std::map<std::string, std::string> checksums_before;
  std::map<std::string, std::string> checksums_after;
  std::vector<std::string> frozen_groups;
  double wall_seconds = 0.0;

  /// Frozen groups whose bytes changed (should be empty).
  std::vector<std::string> frozen_violations() const;
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// BC weight w(x) for the configured weight kind.
double reward_weight(double x, WeightKind kind);

nn::Var loss_bc(nn::Graph& g, nn::Var action_logits, const std::array<Action, kActionHorizon>& labels);

/// Scalar expectile residual loss (graph-free form of Graph::expectile).
double loss_expectile(double pred, double target, double tau, nn::ExpectileSign sign = nn::ExpectileSign::Intent);

struct Stage1Labels {
  std::array<int, kSectors> categories{};
  std::array<int, kSectors> buckets{};
  Action last_action = Action::Stop;
};

Stage1Labels stage1_labels(const StepRecord& r);
nn::Var loss_stage1(nn::Graph& g, const Stage1Logits& logits, const Stage1Labels& labels);

struct Stage3Terms {
  nn::Var total;
  nn::Var bc;
  nn::Var rtg;
  double weight = 1.0;
};

/// w(target) * BC + lambda * expectile(r_hat, target); w is a constant.
Stage3Terms loss_stage3(nn::Graph& g, nn::Var action_logits, const std::array<Action, kActionHorizon>& labels,
                        nn::Var rtg_pred, const RewardLabel& label, const StageConfig& cfg);

/// Trains `policy` in place on `records` for one stage. Adds the stage's
/// temporary or new heads, applies the freeze schedule, and drops the
/// temporary heads again at the end (stages 0 and 1).
TrainReport run_stage(Policy& policy, std::span<const StepRecord> records, const StageConfig& cfg);

/// One labelled record from a Frontier episode in a freshly generated world;
/// the sample used by gradient checks and smoke tests.
StepRecord make_probe_record(std::uint64_t seed, const WorldConfig& world = {}, const EpisodeConfig& episode = {});

/// Gradient check of every loss the policy is trained with (reconstruction,
/// map understanding, reward-weighted BC and expectile) on one record, with
/// every group of `policy` including the temporary heads unfrozen.
nn::GradCheckReport policy_grad_check(Policy& policy, const StepRecord& sample, const nn::GradCheckConfig& cfg = {});

}  // namespace navlab
