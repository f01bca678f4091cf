#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "navlab/demogen.hpp"

namespace navlab {

enum class WeightKind { Softplus, Exp, None };
enum class RewardKind { RTG, Instant };

std::string_view to_string(WeightKind k);
std::string_view to_string(RewardKind k);
WeightKind parse_weight_kind(std::string_view s);
RewardKind parse_reward_kind(std::string_view s);

struct RewardConfig {
  double gamma = 0.9;
  int window = 4;  // RTG summation horizon W
  double sigma_floor = 1e-6;
  WeightKind weight_kind = WeightKind::Softplus;
  RewardKind reward_kind = RewardKind::RTG;
  int progress_horizon = kActionHorizon;

  void validate() const;
};

/// value_t = d_t - d_{t+h} for t in [0, T), where `distances` holds
/// d_0 .. d_T and indices past T clamp to d_T. Throws ConfigError on
/// non-finite distances.
std::vector<double> raw_progress(std::span<const double> distances, int horizon = kActionHorizon);
std::vector<double> raw_progress(const Episode& ep, int horizon = kActionHorizon);

/// Per-episode z-score with population standard deviation; sigma below the
/// floor is replaced by 1.
std::vector<double> normalize_rewards(std::span<const double> raw, const RewardConfig& cfg);

/// RTG_t = sum_{k<W} gamma^k R_{t+k}, with R past the end taken as 0.
std::vector<double> return_to_go(std::span<const double> rewards, const RewardConfig& cfg);

/// Labels all records of one episode (ordered by t) in place.
void label_episode(std::span<StepRecord> records, const RewardConfig& cfg);

}  // namespace navlab
