#include "navlab/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "navlab/common.hpp"

namespace navlab {

std::string_view to_string(WeightKind k) {
  switch (k) {
    case WeightKind::Softplus: return "softplus";
    case WeightKind::Exp: return "exp";
    case WeightKind::None: return "none";
  }
  return "?";
}

std::string_view to_string(RewardKind k) { return k == RewardKind::RTG ? "rtg" : "instant"; }

WeightKind parse_weight_kind(std::string_view s) {
  if (s == "softplus") return WeightKind::Softplus;
  if (s == "exp") return WeightKind::Exp;
  if (s == "none") return WeightKind::None;
  throw ConfigError("unknown weight kind: " + std::string(s));
}

RewardKind parse_reward_kind(std::string_view s) {
  if (s == "rtg") return RewardKind::RTG;
  if (s == "instant") return RewardKind::Instant;
  throw ConfigError("unknown reward kind: " + std::string(s));
}

void RewardConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("reward: gamma must be in [0, 1]");
  if (window < 1) throw ConfigError("reward: window must be >= 1");
  if (!(sigma_floor > 0.0)) throw ConfigError("reward: sigma_floor must be > 0");
  if (progress_horizon < 1) throw ConfigError("reward: progress horizon must be >= 1");
}

std::vector<double> raw_progress(std::span<const double> distances, int horizon) {
  if (distances.size() < 2) throw ConfigError("raw_progress: need at least d_0 and d_T");
  for (double d : distances) {
    if (!std::isfinite(d)) throw ConfigError("raw_progress: episode has an unreachable step");
  }
  const std::size_t T = distances.size() - 1;
  std::vector<double> raw(T);
  for (std::size_t t = 0; t < T; ++t) {
    raw[t] = distances[t] - distances[std::min(t + static_cast<std::size_t>(horizon), T)];
  }
  return raw;
}

std::vector<double> raw_progress(const Episode& ep, int horizon) {
  const auto d = ep.distances();
  return raw_progress(std::vector<double>(d.begin(), d.end()), horizon);
}

std::vector<double> normalize_rewards(std::span<const double> raw, const RewardConfig& cfg) {
  if (raw.empty()) throw ConfigError("normalize_rewards: empty episode");
  const double n = static_cast<double>(raw.size());
  double mean = 0.0;
  for (double v : raw) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : raw) var += (v - mean) * (v - mean);
  double sigma = std::sqrt(var / n);
  if (sigma < cfg.sigma_floor) sigma = 1.0;
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - mean) / sigma;
  return out;
}

std::vector<double> return_to_go(std::span<const double> rewards, const RewardConfig& cfg) {
  std::vector<double> out(rewards.size(), 0.0);
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    double acc = 0.0;
    double discount = 1.0;
    for (int k = 0; k < cfg.window && t + k < rewards.size(); ++k) {
      acc += discount * rewards[t + k];
      discount *= cfg.gamma;
    }
    out[t] = acc;
  }
  return out;
}

void label_episode(std::span<StepRecord> records, const RewardConfig& cfg) {
  if (records.empty()) return;
  std::vector<double> d;
  d.reserve(records.size() + 1);
  for (const auto& r : records) d.push_back(r.distance);
  d.push_back(records.back().final_distance);
  const auto raw = raw_progress(d, cfg.progress_horizon);
  const auto r = normalize_rewards(raw, cfg);
  const auto rtg = return_to_go(r, cfg);
  for (std::size_t i = 0; i < records.size(); ++i) records[i].reward = RewardLabel{raw[i], r[i], rtg[i]};
}

}  // namespace navlab
