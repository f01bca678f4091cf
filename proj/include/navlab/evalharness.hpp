#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "navlab/common.hpp"
#include "navlab/demogen.hpp"
#include "navlab/policy.hpp"

namespace navlab {

struct EpisodeResult {
  std::uint64_t world_seed = 0;
  int goal = 0;
  bool success = false;
  double shortest = 0.0;  // l_i
  int path = 0;           // p_i: Forward attempts
  int steps = 0;
  bool stopped = false;
  std::vector<Pose> trace;  // poses visited, start first
};

struct CategoryMetrics {
  std::size_t n = 0;
  double sr = 0.0;
  double spl = 0.0;
};

struct MetricsReport {
  std::size_t n = 0;
  double sr = 0.0;
  double spl = 0.0;
  double mean_steps = 0.0;
  std::map<int, CategoryMetrics> per_category;

  nlohmann::json to_json() const;
};

/// SR = mean S_i; SPL = mean S_i * l_i / max(p_i, l_i). Throws on an empty
/// list or on l_i <= 0.
MetricsReport compute_metrics(std::span<const EpisodeResult> results);

/// What an agent may look at when planning.
struct AgentView {
  const World& world;
  const SemanticMap& map;  // allocentric, updated after every action
  Pose pose;
  std::span<const Observation> frames;  // O_{t-3} .. O_t
  int goal = 0;
  int t = 0;
};

class Agent {
 public:
  virtual ~Agent() = default;
  /// Next actions to execute in order (at least one). A Stop ends the episode.
  virtual std::vector<Action> plan(const AgentView& view) = 0;
};

/// The trained policy: predicts 4 actions, truncated after the first Stop.
class PolicyAgent : public Agent {
 public:
  PolicyAgent(const Policy& policy, DecodeMode mode, std::uint64_t seed = 0);
  std::vector<Action> plan(const AgentView& view) override;

 private:
  const Policy& policy_;
  DecodeMode mode_;
  std::uint64_t seed_;
};

/// Uniform over all four actions, one at a time.
class RandomAgent : public Agent {
 public:
  explicit RandomAgent(std::uint64_t seed) : rng_(seed) {}
  std::vector<Action> plan(const AgentView& view) override;

 private:
  Rng rng_;
};

/// Repeats one action forever.
class ConstantAgent : public Agent {
 public:
  explicit ConstantAgent(Action a) : action_(a) {}
  std::vector<Action> plan(const AgentView&) override { return {action_}; }

 private:
  Action action_;
};

/// Plays back a fixed action list, then Stop.
class ReplayAgent : public Agent {
 public:
  explicit ReplayAgent(std::vector<Action> actions) : actions_(std::move(actions)) {}
  std::vector<Action> plan(const AgentView& view) override;

 private:
  std::vector<Action> actions_;
  std::size_t next_ = 0;
};

struct RolloutConfig {
  int budget = kDefaultBudget;
  SensorConfig sensor{};
  bool record_trace = false;
};

/// Every action, Stop included, consumes one unit of budget. Success iff a
/// Stop is issued within kSuccessRadius of the goal.
EpisodeResult rollout(const World& world, int goal, const Pose& start, Agent& agent, const RolloutConfig& cfg = {});

struct EvalTask {
  std::size_t world_index = 0;
  int goal = 0;
  Pose start;
  std::uint64_t seed = 0;
};

/// `goals_per_world` distinct goal categories per world (seeded), one spawn each.
std::vector<EvalTask> plan_evaluation(std::span<const World> worlds, int goals_per_world, std::uint64_t seed,
                                      const EpisodeConfig& episode = {});

enum class AgentKind { Policy, Random };

std::vector<EpisodeResult> evaluate(std::span<const World> worlds, std::span<const EvalTask> tasks, AgentKind kind,
                                    const Policy* policy, DecodeMode mode, const RolloutConfig& cfg = {});

/// One CSV row per episode.
std::string results_csv(std::span<const EpisodeResult> results);

}  // namespace navlab
