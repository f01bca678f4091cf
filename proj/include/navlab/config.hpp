#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "navlab/demogen.hpp"
#include "navlab/gridsim.hpp"
#include "navlab/policy.hpp"
#include "navlab/rewards.hpp"
#include "navlab/training.hpp"

namespace navlab {

/// Everything a pipeline run depends on. Read from an INI file whose
/// sections mirror the fields; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  WorldConfig world{};
  EpisodeConfig episode{};
  DemoMix mix{};
  PolicyConfig policy{};
  RewardConfig reward{};
  std::array<StageConfig, 4> stages{StageConfig::defaults(0), StageConfig::defaults(1), StageConfig::defaults(2),
                                    StageConfig::defaults(3)};
  int eval_goals = 5;
  DecodeMode eval_decode = DecodeMode::Greedy;

  /// Defaults, then `path` (if non-empty), then NAVLAB_SEED.
  static RunConfig load(const std::string& path);
  static RunConfig parse(const std::string& ini_text);

  /// Stage config with the run's reward settings and a seed derived from
  /// the global seed's "train" substream.
  StageConfig stage(int s) const;

  /// Fully resolved config in the same INI dialect.
  std::string to_ini() const;
  /// SHA-256 of to_ini().
  std::string hash() const;
};

/// Applies NAVLAB_SEED if set; throws ConfigError on a malformed value.
void apply_seed_override(RunConfig& cfg);

}  // namespace navlab
