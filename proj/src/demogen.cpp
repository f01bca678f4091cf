#include "navlab/demogen.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iterator>
#include <numeric>
#include <stdexcept>

#include "navlab/common.hpp"

namespace navlab {

std::string_view to_string(DemoKind k) {
  switch (k) {
    case DemoKind::Expert: return "expert";
    case DemoKind::Frontier: return "frontier";
    case DemoKind::Noisy: return "noisy";
  }
  return "?";
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Failure: return "failure";
    case Outcome::Timeout: return "timeout";
  }
  return "?";
}

DemoKind parse_demo_kind(std::string_view s) {
  if (s == "expert") return DemoKind::Expert;
  if (s == "frontier") return DemoKind::Frontier;
  if (s == "noisy") return DemoKind::Noisy;
  throw FormatError("unknown demonstration kind: " + std::string(s));
}

Outcome parse_outcome(std::string_view s) {
  if (s == "success") return Outcome::Success;
  if (s == "failure") return Outcome::Failure;
  if (s == "timeout") return Outcome::Timeout;
  throw FormatError("unknown outcome: " + std::string(s));
}

std::vector<Action> Episode::actions() const {
  std::vector<Action> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.action);
  return out;
}

std::vector<float> Episode::distances() const {
  std::vector<float> d;
  d.reserve(steps.size() + 1);
  for (const auto& s : steps) d.push_back(s.distance);
  d.push_back(final_distance);
  return d;
}

namespace {

constexpr std::array<Cell, 4> kNeighbors{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};

// Step toward lower values of a BFS distance field (first in N, E, S, W order).
Action descend(const World& world, const std::vector<int>& field, const Pose& pose) {
  const int here = field[world.index(pose.cell)];
  if (here == 0) return Action::Stop;
  for (const auto& d : kNeighbors) {
    const Cell n{pose.cell.x + d.x, pose.cell.y + d.y};
    if (world.free(n) && field[world.index(n)] == here - 1) return action_toward(pose, n);
  }
  return Action::Stop;
}

bool unknown(const SemanticMap& map, int mx, int my) {
  return !map.get(kFreeChannel, mx, my) && !map.get(kObstacleChannel, mx, my);
}

bool is_frontier(const SemanticMap& map, int mx, int my) {
  if (!map.get(kFreeChannel, mx, my)) return false;
  for (const auto& d : kNeighbors) {
    const int nx = mx + d.x;
    const int ny = my + d.y;
    if (map.contains(nx, ny) && unknown(map, nx, ny)) return true;
  }
  return false;
}

class ScriptedPolicy {
 public:
  ScriptedPolicy(const World& world, int goal, DemoKind kind, std::uint64_t seed, const EpisodeConfig& cfg)
      : world_(world), goal_(goal), kind_(kind), rng_(derive_seed(seed, "policy")), cfg_(cfg) {
    if (kind_ == DemoKind::Expert) expert_field_ = distance_field(world_, world_.goal_cells(goal_));
  }

  Action choose(const Pose& pose, const SemanticMap& map) {
    if (kind_ == DemoKind::Noisy && uniform01(rng_) < cfg_.noisy_epsilon) {
      constexpr std::array<Action, 3> kMoves{Action::Forward, Action::TurnLeft, Action::TurnRight};
      return kMoves[uniform_index(rng_, kMoves.size())];
    }
    if (kind_ == DemoKind::Expert) return descend(world_, expert_field_, pose);
    return explore(pose, map);
  }

 private:
  Action explore(const Pose& pose, const SemanticMap& map) {
    // Head for seen goal cells once any are on the map.
    std::vector<Cell> seen;
    const int ch = semantic_channel(goal_);
    for (int my = 0; my < map.size(); ++my) {
      for (int mx = 0; mx < map.size(); ++mx) {
        if (map.get(ch, mx, my)) seen.push_back(map.to_world({mx, my}));
      }
    }
    if (!seen.empty()) {
      if (seen != seen_goal_cells_) {
        seen_goal_cells_ = seen;
        seen_field_ = distance_field(world_, seen);
      }
      if (seen_field_[world_.index(pose.cell)] != kNoPath) return descend(world_, seen_field_, pose);
    }

    const auto frontier = nearest_frontier(map, pose.cell);
    if (!frontier) return Action::Stop;
    if (*frontier == pose.cell) {
      // Standing on the frontier: face the unexplored neighbour.
      const auto here = map.to_map(pose.cell);
      for (int i = 0; i < 4; ++i) {
        const Heading h = static_cast<Heading>((static_cast<int>(pose.heading) + i) % 4);
        const Cell d = heading_vector(h);
        const int nx = here->x + d.x;
        const int ny = here->y + d.y;
        if (map.contains(nx, ny) && unknown(map, nx, ny)) {
          return action_toward(pose, {pose.cell.x + d.x, pose.cell.y + d.y});
        }
      }
      return Action::TurnRight;
    }
    return action_toward(pose, first_step(map, pose.cell, *frontier));
  }

  // First cell on the BFS path over known-free cells from `from` to `to`.
  static Cell first_step(const SemanticMap& map, Cell from, Cell to) {
    const int n = map.size();
    const auto start = *map.to_map(from);
    const auto goal = *map.to_map(to);
    std::vector<int> parent(static_cast<std::size_t>(n) * n, -1);
    std::deque<Cell> queue{start};
    parent[start.y * n + start.x] = start.y * n + start.x;
    while (!queue.empty()) {
      const Cell c = queue.front();
      queue.pop_front();
      if (c == goal) break;
      for (const auto& d : kNeighbors) {
        const Cell nb{c.x + d.x, c.y + d.y};
        if (!map.contains(nb.x, nb.y) || !map.get(kFreeChannel, nb.x, nb.y)) continue;
        if (parent[nb.y * n + nb.x] >= 0) continue;
        parent[nb.y * n + nb.x] = c.y * n + c.x;
        queue.push_back(nb);
      }
    }
    int cur = goal.y * n + goal.x;
    const int origin = start.y * n + start.x;
    while (parent[cur] != origin) cur = parent[cur];
    return map.to_world({cur % n, cur / n});
  }

  const World& world_;
  int goal_;
  DemoKind kind_;
  Rng rng_;
  EpisodeConfig cfg_;
  std::vector<int> expert_field_;
  std::vector<Cell> seen_goal_cells_;
  std::vector<int> seen_field_;
};

}  // namespace

Action action_toward(const Pose& pose, Cell target) {
  const Cell d{target.x - pose.cell.x, target.y - pose.cell.y};
  const Cell f = heading_vector(pose.heading);
  if (d == f) return Action::Forward;
  const Cell left = heading_vector(turn_left(pose.heading));
  if (d == left) return Action::TurnLeft;
  return Action::TurnRight;
}

std::optional<Cell> nearest_frontier(const SemanticMap& map, Cell from) {
  const auto start = map.to_map(from);
  if (!start) return std::nullopt;
  const int n = map.size();
  std::vector<int> dist(static_cast<std::size_t>(n) * n, -1);
  std::deque<Cell> queue{*start};
  dist[start->y * n + start->x] = 0;
  int best_dist = -1;
  std::optional<Cell> best;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    const int dc = dist[c.y * n + c.x];
    if (best_dist >= 0 && dc > best_dist) break;
    if (is_frontier(map, c.x, c.y)) {
      const Cell w = map.to_world(c);
      if (!best || std::tie(w.x, w.y) < std::tie(best->x, best->y)) best = w;
      best_dist = dc;
    }
    for (const auto& d : kNeighbors) {
      const Cell nb{c.x + d.x, c.y + d.y};
      if (!map.contains(nb.x, nb.y) || !map.get(kFreeChannel, nb.x, nb.y)) continue;
      if (dist[nb.y * n + nb.x] >= 0) continue;
      dist[nb.y * n + nb.x] = dc + 1;
      queue.push_back(nb);
    }
  }
  return best;
}

std::optional<Pose> sample_spawn(const World& world, int goal, std::uint64_t seed, const EpisodeConfig& cfg) {
  const auto goal_cells = world.goal_cells(goal);
  if (goal_cells.empty()) return std::nullopt;
  const auto field = distance_field(world, goal_cells);
  std::vector<Cell> candidates;
  for (const auto& c : spawnable_cells(world)) {
    const int d = field[world.index(c)];
    if (d != kNoPath && d >= cfg.min_spawn_distance) candidates.push_back(c);
  }
  if (candidates.empty()) return std::nullopt;
  Rng rng(derive_seed(seed, "spawn"));
  Pose p;
  p.cell = candidates[uniform_index(rng, candidates.size())];
  p.heading = static_cast<Heading>(uniform_index(rng, 4));
  return p;
}

Episode run_policy_episode(const World& world, int goal, DemoKind kind, std::uint64_t seed,
                           const EpisodeConfig& cfg) {
  if (world.goal_cells(goal).empty()) throw ConfigError("episode: goal category not present in world");
  const auto spawn = sample_spawn(world, goal, seed, cfg);
  if (!spawn) {
    // No cell can reach the goal: a single failed Stop.
    Episode ep;
    ep.world_seed = world.seed();
    ep.seed = seed;
    ep.goal = goal;
    ep.source = kind;
    ep.outcome = Outcome::Failure;
    return ep;
  }
  return run_policy_episode(world, goal, kind, seed, *spawn, cfg);
}

Episode run_policy_episode(const World& world, int goal, DemoKind kind, std::uint64_t seed, const Pose& start,
                           const EpisodeConfig& cfg) {
  if (world.goal_cells(goal).empty()) throw ConfigError("episode: goal category not present in world");
  if (!world.free(start.cell)) throw ConfigError("episode: start pose is not free");
  Episode ep;
  ep.world_seed = world.seed();
  ep.seed = seed;
  ep.goal = goal;
  ep.source = kind;

  const auto goal_field = distance_field(world, world.goal_cells(goal));
  const auto dist_at = [&](Cell c) {
    const int d = goal_field[world.index(c)];
    return d == kNoPath ? kUnreachable : static_cast<float>(d);
  };
  if (dist_at(start.cell) == kUnreachable) {
    ep.outcome = Outcome::Failure;
    ep.final_distance = kUnreachable;
    return ep;
  }

  ScriptedPolicy policy(world, goal, kind, seed, cfg);
  SemanticMap map = SemanticMap::covering(world);
  Pose pose = start;
  ep.outcome = Outcome::Timeout;
  for (int t = 0; t < cfg.budget; ++t) {
    Observation obs = observe(world, pose, cfg.sensor);
    update_map(map, obs, pose, cfg.sensor);
    const Action a = policy.choose(pose, map);
    ep.snapshots.push_back(map);
    ep.steps.push_back({pose, std::move(obs), ep.snapshots.size() - 1, a, dist_at(pose.cell)});
    if (a == Action::Stop) {
      ep.outcome = dist_at(pose.cell) <= kSuccessRadius ? Outcome::Success : Outcome::Failure;
      break;
    }
    pose = step(world, pose, a).pose;
  }
  ep.final_distance = dist_at(pose.cell);
  return ep;
}

bool StepRecord::has_stop_label() const {
  return std::find(labels.begin(), labels.end(), Action::Stop) != labels.end();
}

std::vector<StepRecord> chunk_steps(const Episode& ep, std::uint64_t episode_id, int window) {
  if (ep.steps.empty()) throw ConfigError("chunk_steps: episode has no steps");
  const int T = static_cast<int>(ep.steps.size());
  const auto actions = ep.actions();
  std::vector<StepRecord> out;
  out.reserve(ep.steps.size());
  for (int t = 0; t < T; ++t) {
    const auto& st = ep.steps[t];
    StepRecord r;
    r.episode_id = episode_id;
    r.world_seed = ep.world_seed;
    r.t = t;
    r.episode_length = T;
    r.goal = ep.goal;
    r.source = ep.source;
    r.outcome = ep.outcome;
    const SemanticMap& snapshot = ep.snapshots[st.map_snapshot];
    r.ego_map = egocentric_view(snapshot, st.pose, window);
    for (int i = 0; i < kHistoryFrames; ++i) {
      const int src = std::max(0, t - (kHistoryFrames - 1) + i);
      r.frames[i] = ep.steps[src].obs;
    }
    for (int k = 0; k < kActionHorizon; ++k) {
      r.labels[k] = t + k < T ? actions[t + k] : Action::Stop;
    }
    r.description = describe_map(snapshot, st.pose, std::span(actions).first(static_cast<std::size_t>(t) + 1));
    r.distance = st.distance;
    r.final_distance = ep.final_distance;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::size_t> augment_stop_indices(std::span<const StepRecord> records, double factor, std::uint64_t seed,
                                              double cap) {
  if (factor < 1.0) throw ConfigError("augment_stops: factor must be >= 1");
  std::vector<std::size_t> out(records.size());
  std::iota(out.begin(), out.end(), std::size_t{0});
  std::vector<std::size_t> stops;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].has_stop_label()) stops.push_back(i);
  }
  if (stops.empty() || stops.size() == records.size()) return out;
  const double n = static_cast<double>(records.size());
  const double share = static_cast<double>(stops.size()) / n;
  const double target = std::min(factor * share, cap);
  if (target <= share) return out;
  // Smallest k with (s + k) / (n + k) >= target.
  const auto extra = static_cast<std::size_t>(std::ceil((target * n - static_cast<double>(stops.size())) /
                                                        (1.0 - target) - 1e-9));
  Rng rng(derive_seed(seed, "augment"));
  std::vector<std::size_t> order = stops;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  out.reserve(out.size() + extra);
  for (std::size_t k = 0; k < extra; ++k) out.push_back(order[k % order.size()]);
  return out;
}

std::vector<StepRecord> augment_stops(std::vector<StepRecord> records, double factor, std::uint64_t seed,
                                      double cap) {
  const auto idx = augment_stop_indices(records, factor, seed, cap);
  records.reserve(idx.size());
  for (std::size_t k = records.size(); k < idx.size(); ++k) records.push_back(records[idx[k]]);
  return records;
}

DemoMix parse_mix(std::string_view s) {
  DemoMix m;
  std::array<int, 3> parts{};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const auto next = s.find(':', pos);
    if ((i < 2) != (next != std::string_view::npos)) throw ConfigError("mix must be expert:frontier:noisy");
    const auto tok = s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    try {
      std::size_t used = 0;
      parts[i] = std::stoi(std::string(tok), &used);
      if (used != tok.size() || parts[i] < 0) throw std::invalid_argument("bad");
    } catch (const std::exception&) {
      throw ConfigError("mix must be expert:frontier:noisy with non-negative integers");
    }
    pos = next + 1;
  }
  m.expert = parts[0];
  m.frontier = parts[1];
  m.noisy = parts[2];
  if (m.expert + m.frontier + m.noisy == 0) throw ConfigError("mix must not be all zero");
  return m;
}

std::vector<DemoKind> assign_kinds(std::size_t episodes, const DemoMix& mix, std::uint64_t seed) {
  const double total = mix.expert + mix.frontier + mix.noisy;
  const std::array<double, 3> share{mix.expert / total, mix.frontier / total, mix.noisy / total};
  // Largest-remainder rounding keeps every kind within one episode of its quota.
  std::array<std::size_t, 3> count{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = share[k] * static_cast<double>(episodes);
    count[k] = static_cast<std::size_t>(std::floor(exact));
    rem[k] = exact - std::floor(exact);
    assigned += count[k];
  }
  while (assigned < episodes) {
    const auto k = static_cast<std::size_t>(std::max_element(rem.begin(), rem.end()) - rem.begin());
    ++count[k];
    rem[k] = -1.0;
    ++assigned;
  }
  std::vector<DemoKind> kinds;
  kinds.reserve(episodes);
  for (int k = 0; k < 3; ++k) kinds.insert(kinds.end(), count[k], static_cast<DemoKind>(k));
  Rng rng(derive_seed(seed, "mix"));
  for (std::size_t i = kinds.size(); i > 1; --i) std::swap(kinds[i - 1], kinds[uniform_index(rng, i)]);
  return kinds;
}

std::vector<CollectPlan> plan_collection(std::span<const World> worlds, std::size_t episodes, const DemoMix& mix,
                                         std::uint64_t seed) {
  if (worlds.empty()) throw ConfigError("collect: no worlds");
  const auto kinds = assign_kinds(episodes, mix, seed);
  std::vector<CollectPlan> plan(episodes);
  for (std::size_t i = 0; i < episodes; ++i) {
    const auto& w = worlds[i % worlds.size()];
    const auto cats = w.goal_categories();
    if (cats.empty()) throw ConfigError("collect: world has no goals");
    const std::uint64_t ep_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(derive_seed(ep_seed, "goal"));
    plan[i] = {i % worlds.size(), cats[uniform_index(rng, cats.size())], kinds[i], ep_seed};
  }
  return plan;
}

std::vector<StepRecord> collect(std::span<const World> worlds, std::size_t episodes, const DemoMix& mix,
                                std::uint64_t seed, const EpisodeConfig& cfg) {
  std::vector<StepRecord> out;
  const auto plan = plan_collection(worlds, episodes, mix, seed);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& p = plan[i];
    const auto ep = run_policy_episode(worlds[p.world_index], p.goal, p.kind, p.seed, cfg);
    auto records = chunk_steps(ep, i);
    std::move(records.begin(), records.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace navlab
