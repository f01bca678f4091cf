#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "navlab/gridsim.hpp"
#include "navlab/mapper.hpp"

namespace navlab {

enum class DemoKind : std::uint8_t { Expert, Frontier, Noisy };
enum class Outcome : std::uint8_t { Success, Failure, Timeout };

std::string_view to_string(DemoKind k);
std::string_view to_string(Outcome o);
DemoKind parse_demo_kind(std::string_view s);
Outcome parse_outcome(std::string_view s);

inline constexpr int kDefaultBudget = 200;
inline constexpr int kSuccessRadius = 1;
inline constexpr int kActionHorizon = 4;
inline constexpr int kHistoryFrames = 4;  // three history frames plus the current one
inline constexpr double kNoisyEpsilon = 0.3;

struct EpisodeConfig {
  int budget = kDefaultBudget;
  int min_spawn_distance = 2;
  double noisy_epsilon = kNoisyEpsilon;
  SensorConfig sensor{};
};

struct EpisodeStep {
  Pose pose;
  Observation obs;
  std::size_t map_snapshot = 0;  // index into Episode::snapshots
  Action action = Action::Stop;
  float distance = 0.0f;  // geodesic distance to the goal before acting
};

struct Episode {
  std::uint64_t world_seed = 0;
  std::uint64_t seed = 0;
  int goal = 0;
  DemoKind source = DemoKind::Expert;
  Outcome outcome = Outcome::Failure;
  std::vector<EpisodeStep> steps;
  std::vector<SemanticMap> snapshots;  // allocentric map after observing at each step
  float final_distance = 0.0f;         // distance after the last executed action

  std::vector<Action> actions() const;
  /// d_0 .. d_T: per-step distances followed by the final distance.
  std::vector<float> distances() const;
};

/// Spawn pose drawn from `seed`: a spawnable cell at least
/// cfg.min_spawn_distance from the goal, random heading.
std::optional<Pose> sample_spawn(const World& world, int goal, std::uint64_t seed, const EpisodeConfig& cfg);

Episode run_policy_episode(const World& world, int goal, DemoKind kind, std::uint64_t seed,
                           const EpisodeConfig& cfg = {});
/// Same, with an explicit start pose.
Episode run_policy_episode(const World& world, int goal, DemoKind kind, std::uint64_t seed, const Pose& start,
                           const EpisodeConfig& cfg = {});

/// Action that turns toward, or steps into, a 4-neighbour `target` of the agent.
Action action_toward(const Pose& pose, Cell target);

/// Frontier cell selection on the agent's own map: nearest (BFS over known
/// free cells) free cell with an unknown 4-neighbour, ties by smallest (x, y).
/// Returns std::nullopt when nothing is left to explore.
std::optional<Cell> nearest_frontier(const SemanticMap& map, Cell from);

struct RewardLabel {
  double raw = 0.0;
  double r = 0.0;
  double rtg = 0.0;
  friend bool operator==(const RewardLabel&, const RewardLabel&) = default;
};

/// One training sample (M_t, O, I, A) plus its map description D_t.
struct StepRecord {
  std::uint64_t episode_id = 0;
  std::uint64_t world_seed = 0;
  int t = 0;
  int episode_length = 0;
  int goal = 0;
  DemoKind source = DemoKind::Expert;
  Outcome outcome = Outcome::Failure;
  SemanticMap ego_map;
  std::array<Observation, kHistoryFrames> frames;  // O_{t-3} .. O_t
  std::array<Action, kActionHorizon> labels{};     // a_t .. a_{t+3}
  MapDescription description;
  float distance = 0.0f;        // d_t
  float final_distance = 0.0f;  // d_T of the episode
  std::optional<RewardLabel> reward;

  bool has_stop_label() const;
};

/// One record per step; frames before t = 0 repeat O_0, labels past the
/// end are Stop.
std::vector<StepRecord> chunk_steps(const Episode& ep, std::uint64_t episode_id, int window = kDefaultWindow);

/// Duplicates Stop-containing records until their share reaches
/// min(factor x original share, cap). Appended copies cycle through a
/// seeded permutation of the Stop-containing records.
std::vector<StepRecord> augment_stops(std::vector<StepRecord> records, double factor, std::uint64_t seed,
                                      double cap = 0.25);
/// Index form of augment_stops: 0..n-1 followed by the duplicated indices.
std::vector<std::size_t> augment_stop_indices(std::span<const StepRecord> records, double factor, std::uint64_t seed,
                                              double cap = 0.25);

struct DemoMix {
  int expert = 2;
  int frontier = 5;
  int noisy = 3;
};

DemoMix parse_mix(std::string_view s);

/// Exact-count assignment of episode kinds, shuffled by `seed`.
std::vector<DemoKind> assign_kinds(std::size_t episodes, const DemoMix& mix, std::uint64_t seed);

struct CollectPlan {
  std::size_t world_index = 0;
  int goal = 0;
  DemoKind kind = DemoKind::Expert;
  std::uint64_t seed = 0;
};

/// Episode i runs in world i mod |worlds|; goal, spawn and policy RNG are
/// derived from (seed, i) only.
std::vector<CollectPlan> plan_collection(std::span<const World> worlds, std::size_t episodes, const DemoMix& mix,
                                         std::uint64_t seed);

/// Runs the plan and chunks every episode; episode i gets id i.
std::vector<StepRecord> collect(std::span<const World> worlds, std::size_t episodes, const DemoMix& mix,
                                std::uint64_t seed, const EpisodeConfig& cfg = {});

}  // namespace navlab
