#include "navlab/evalharness.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "navlab/common.hpp"

namespace navlab {

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j{{"n", n}, {"sr", sr}, {"spl", spl}, {"mean_steps", mean_steps}};
  auto cats = nlohmann::json::object();
  for (const auto& [cat, m] : per_category) {
    cats[category_name(cat)] = {{"n", m.n}, {"sr", m.sr}, {"spl", m.spl}};
  }
  j["per_category"] = cats;
  return j;
}

MetricsReport compute_metrics(std::span<const EpisodeResult> results) {
  if (results.empty()) throw ConfigError("compute_metrics: no episodes");
  MetricsReport m;
  m.n = results.size();
  double steps = 0.0;
  for (const auto& r : results) {
    if (!(r.shortest > 0.0)) throw ConfigError("compute_metrics: shortest path length must be positive");
    const double s = r.success ? 1.0 : 0.0;
    const double spl = s * r.shortest / std::max(static_cast<double>(r.path), r.shortest);
    m.sr += s;
    m.spl += spl;
    steps += r.steps;
    auto& c = m.per_category[r.goal];
    ++c.n;
    c.sr += s;
    c.spl += spl;
  }
  const double n = static_cast<double>(m.n);
  m.sr /= n;
  m.spl /= n;
  m.mean_steps = steps / n;
  for (auto& [cat, c] : m.per_category) {
    c.sr /= static_cast<double>(c.n);
    c.spl /= static_cast<double>(c.n);
  }
  return m;
}

PolicyAgent::PolicyAgent(const Policy& policy, DecodeMode mode, std::uint64_t seed)
    : policy_(policy), mode_(mode), seed_(seed) {}

std::vector<Action> PolicyAgent::plan(const AgentView& view) {
  const auto ego = egocentric_view(view.map, view.pose, policy_.config().map_size);
  const auto pred = policy_.predict(ego, view.frames, view.goal);
  const auto actions = select_actions(pred.logits, mode_, derive_seed(seed_, static_cast<std::uint64_t>(view.t)));
  std::vector<Action> out;
  for (auto a : actions) {
    out.push_back(a);
    if (a == Action::Stop) break;
  }
  return out;
}

std::vector<Action> RandomAgent::plan(const AgentView&) {
  return {static_cast<Action>(uniform_index(rng_, kNumActions))};
}

std::vector<Action> ReplayAgent::plan(const AgentView&) {
  if (next_ >= actions_.size()) return {Action::Stop};
  return {actions_[next_++]};
}

EpisodeResult rollout(const World& world, int goal, const Pose& start, Agent& agent, const RolloutConfig& cfg) {
  const auto goal_cells = world.goal_cells(goal);
  if (goal_cells.empty()) throw ConfigError("rollout: goal category absent from world");
  EpisodeResult res;
  res.world_seed = world.seed();
  res.goal = goal;
  res.shortest = geodesic_distance(world, start.cell, goal_cells);

  SemanticMap map = SemanticMap::covering(world);
  Pose pose = start;
  Observation obs = observe(world, pose, cfg.sensor);
  update_map(map, obs, pose, cfg.sensor);
  std::deque<Observation> frames(kHistoryFrames, obs);
  if (cfg.record_trace) res.trace.push_back(pose);

  bool done = false;
  while (!done && res.steps < cfg.budget) {
    const std::vector<Observation> window(frames.begin(), frames.end());
    const auto actions = agent.plan(AgentView{world, map, pose, window, goal, res.steps});
    if (actions.empty()) throw ConfigError("rollout: agent returned no action");
    for (auto a : actions) {
      if (res.steps >= cfg.budget) break;
      ++res.steps;
      if (a == Action::Stop) {
        res.stopped = true;
        res.success = geodesic_distance(world, pose.cell, goal_cells) <= kSuccessRadius;
        done = true;
        break;
      }
      if (a == Action::Forward) ++res.path;
      pose = step(world, pose, a).pose;
      obs = observe(world, pose, cfg.sensor);
      update_map(map, obs, pose, cfg.sensor);
      frames.pop_front();
      frames.push_back(obs);
      if (cfg.record_trace) res.trace.push_back(pose);
    }
  }
  return res;
}

std::vector<EvalTask> plan_evaluation(std::span<const World> worlds, int goals_per_world, std::uint64_t seed,
                                      const EpisodeConfig& episode) {
  std::vector<EvalTask> tasks;
  for (std::size_t w = 0; w < worlds.size(); ++w) {
    auto cats = worlds[w].goal_categories();
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(w)));
    for (std::size_t i = cats.size(); i > 1; --i) std::swap(cats[i - 1], cats[uniform_index(rng, i)]);
    const std::size_t take = std::min(cats.size(), static_cast<std::size_t>(goals_per_world));
    for (std::size_t k = 0; k < take; ++k) {
      const auto task_seed = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(w)), static_cast<std::uint64_t>(k));
      const auto start = sample_spawn(worlds[w], cats[k], task_seed, episode);
      if (!start) continue;
      tasks.push_back({w, cats[k], *start, task_seed});
    }
  }
  return tasks;
}

std::vector<EpisodeResult> evaluate(std::span<const World> worlds, std::span<const EvalTask> tasks, AgentKind kind,
                                    const Policy* policy, DecodeMode mode, const RolloutConfig& cfg) {
  if (kind == AgentKind::Policy && policy == nullptr) throw ConfigError("evaluate: policy agent needs a checkpoint");
  std::vector<EpisodeResult> out;
  out.reserve(tasks.size());
  for (const auto& t : tasks) {
    std::unique_ptr<Agent> agent;
    if (kind == AgentKind::Policy) {
      agent = std::make_unique<PolicyAgent>(*policy, mode, t.seed);
    } else {
      agent = std::make_unique<RandomAgent>(derive_seed(t.seed, "random"));
    }
    out.push_back(rollout(worlds[t.world_index], t.goal, t.start, *agent, cfg));
  }
  return out;
}

std::string results_csv(std::span<const EpisodeResult> results) {
  std::ostringstream os;
  os << "episode,world,goal,success,shortest,path,steps,stopped\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    os << i << ',' << r.world_seed << ',' << category_name(r.goal) << ',' << (r.success ? 1 : 0) << ',' << r.shortest
       << ',' << r.path << ',' << r.steps << ',' << (r.stopped ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace navlab
