#include "navlab/gridsim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include <json.hpp>

#include "navlab/common.hpp"

namespace navlab {

char action_symbol(Action a) {
  switch (a) {
    case Action::Forward: return 'F';
    case Action::TurnLeft: return 'L';
    case Action::TurnRight: return 'R';
    case Action::Stop: return 'S';
  }
  return '?';
}

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Forward: return "forward";
    case Action::TurnLeft: return "turn_left";
    case Action::TurnRight: return "turn_right";
    case Action::Stop: return "stop";
  }
  return "?";
}

char heading_symbol(Heading h) { return "NESW"[static_cast<int>(h)]; }

World::World(int width, int height, std::uint64_t seed, int categories)
    : width_(width),
      height_(height),
      categories_(categories),
      seed_(seed),
      occupancy_(static_cast<std::size_t>(width) * height, 0),
      semantic_(static_cast<std::size_t>(width) * height, 0) {}

std::span<const Cell> World::goal_cells(int category) const {
  for (const auto& g : goals_) {
    if (g.category == category) return g.cells;
  }
  return {};
}

std::vector<int> World::goal_categories() const {
  std::vector<int> cats;
  for (const auto& g : goals_) cats.push_back(g.category);
  std::sort(cats.begin(), cats.end());
  return cats;
}

nlohmann::json World::to_json() const {
  nlohmann::json j;
  j["version"] = 1;
  j["seed"] = seed_;
  j["width"] = width_;
  j["height"] = height_;
  j["categories"] = categories_;
  auto occ = nlohmann::json::array();
  auto sem = nlohmann::json::array();
  for (int y = 0; y < height_; ++y) {
    std::string row(static_cast<std::size_t>(width_), '0');
    auto srow = nlohmann::json::array();
    for (int x = 0; x < width_; ++x) {
      if (obstacle({x, y})) row[x] = '1';
      srow.push_back(semantic({x, y}));
    }
    occ.push_back(row);
    sem.push_back(srow);
  }
  j["occupancy"] = occ;
  j["semantic"] = sem;
  auto goals = nlohmann::json::array();
  for (const auto& g : goals_) {
    auto cells = nlohmann::json::array();
    for (const auto& c : g.cells) cells.push_back({c.x, c.y});
    goals.push_back({{"category", g.category}, {"cells", cells}});
  }
  j["goals"] = goals;
  return j;
}

World World::from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw FormatError("world: unsupported version");
    World w(j.at("width").get<int>(), j.at("height").get<int>(), j.at("seed").get<std::uint64_t>(),
            j.value("categories", 0));
    const auto& occ = j.at("occupancy");
    const auto& sem = j.at("semantic");
    if (occ.size() != static_cast<std::size_t>(w.height_) || sem.size() != occ.size()) {
      throw FormatError("world: row count does not match height");
    }
    int max_cat = 0;
    for (int y = 0; y < w.height_; ++y) {
      const auto row = occ[y].get<std::string>();
      if (row.size() != static_cast<std::size_t>(w.width_) || sem[y].size() != row.size()) {
        throw FormatError("world: row width does not match width");
      }
      for (int x = 0; x < w.width_; ++x) {
        if (row[x] != '0' && row[x] != '1') throw FormatError("world: occupancy must be 0/1");
        w.set_obstacle({x, y}, row[x] == '1');
        const int s = sem[y][x].get<int>();
        if (s < 0 || s > 255) throw FormatError("world: semantic id out of range");
        w.set_semantic({x, y}, s);
        max_cat = std::max(max_cat, s);
      }
    }
    for (const auto& g : j.at("goals")) {
      GoalObject obj;
      obj.category = g.at("category").get<int>();
      for (const auto& c : g.at("cells")) {
        Cell cell{c.at(0).get<int>(), c.at(1).get<int>()};
        if (!w.in_bounds(cell)) throw FormatError("world: goal cell out of bounds");
        obj.cells.push_back(cell);
      }
      max_cat = std::max(max_cat, obj.category);
      w.goals_.push_back(std::move(obj));
    }
    if (w.categories_ == 0) w.categories_ = max_cat;
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("world: ") + e.what());
  }
}

World load_world(const std::string& path) {
  try {
    return World::from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void save_world(const World& world, const std::string& path) {
  io::write_file(path, world.to_json().dump() + "\n");
}

namespace {

constexpr std::array<Cell, 4> kNeighbors{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};

Cell operator+(Cell a, Cell b) { return {a.x + b.x, a.y + b.y}; }

// Labels 4-connected free components; returns labels (-1 for obstacles)
// and the label of the largest component.
std::pair<std::vector<int>, int> free_components(const World& w, std::vector<int>* sizes_out = nullptr) {
  std::vector<int> label(static_cast<std::size_t>(w.width()) * w.height(), -1);
  std::vector<int> sizes;
  std::deque<Cell> queue;
  for (int y = 0; y < w.height(); ++y) {
    for (int x = 0; x < w.width(); ++x) {
      const Cell start{x, y};
      if (!w.free(start) || label[w.index(start)] >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      sizes.push_back(0);
      label[w.index(start)] = id;
      queue.push_back(start);
      while (!queue.empty()) {
        const Cell c = queue.front();
        queue.pop_front();
        ++sizes[id];
        for (const auto& d : kNeighbors) {
          const Cell n = c + d;
          if (w.free(n) && label[w.index(n)] < 0) {
            label[w.index(n)] = id;
            queue.push_back(n);
          }
        }
      }
    }
  }
  int best = -1;
  for (int i = 0; i < static_cast<int>(sizes.size()); ++i) {
    if (best < 0 || sizes[i] > sizes[best]) best = i;
  }
  if (sizes_out) *sizes_out = sizes;
  return {std::move(label), best};
}

int uniform_int(Rng& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(hi - lo + 1)));
}

// Interior wall with one or two doorways, splitting the map into rooms.
void add_wall(World& w, Rng& rng, bool vertical) {
  const int span = vertical ? w.height() : w.width();
  const int across = vertical ? w.width() : w.height();
  if (across < 10) return;
  const int pos = uniform_int(rng, across / 3, across - across / 3 - 1);
  std::vector<bool> door(static_cast<std::size_t>(span), false);
  const int doors = 1 + static_cast<int>(uniform_index(rng, 2));
  for (int d = 0; d < doors; ++d) {
    const int at = uniform_int(rng, 2, span - 4);
    door[at] = door[at + 1] = true;
  }
  for (int i = 1; i < span - 1; ++i) {
    if (door[i]) continue;
    const Cell c = vertical ? Cell{pos, i} : Cell{i, pos};
    w.set_obstacle(c, true);
  }
}

std::optional<World> try_generate(std::uint64_t seed, const WorldConfig& cfg, Rng& rng) {
  World w(cfg.width, cfg.height, seed, cfg.categories);
  for (int x = 0; x < cfg.width; ++x) {
    w.set_obstacle({x, 0}, true);
    w.set_obstacle({x, cfg.height - 1}, true);
  }
  for (int y = 0; y < cfg.height; ++y) {
    w.set_obstacle({0, y}, true);
    w.set_obstacle({cfg.width - 1, y}, true);
  }
  add_wall(w, rng, true);
  add_wall(w, rng, false);

  const int interior = (cfg.width - 2) * (cfg.height - 2);
  const int clutter = static_cast<int>(std::lround(cfg.clutter_density * interior));
  for (int i = 0; i < clutter; ++i) {
    const Cell c{uniform_int(rng, 1, cfg.width - 2), uniform_int(rng, 1, cfg.height - 2)};
    w.set_obstacle(c, true);
  }

  std::vector<int> sizes;
  auto [label, best] = free_components(w, &sizes);
  if (best < 0 || sizes[best] < interior / 2) return std::nullopt;

  std::vector<Cell> candidates;
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      if (label[w.index({x, y})] == best) candidates.push_back({x, y});
    }
  }

  for (int cat = 1; cat <= cfg.categories; ++cat) {
    GoalObject goal{cat, {}};
    for (int inst = 0; inst < cfg.instances_per_category; ++inst) {
      Cell seed_cell{};
      bool placed = false;
      for (int attempt = 0; attempt < 32 && !placed; ++attempt) {
        seed_cell = candidates[uniform_index(rng, candidates.size())];
        placed = w.semantic(seed_cell) == 0;
      }
      if (!placed) return std::nullopt;
      std::vector<Cell> blob{seed_cell};
      w.set_semantic(seed_cell, cat);
      for (int grow = 1; grow < cfg.instance_cells; ++grow) {
        const Cell from = blob[uniform_index(rng, blob.size())];
        const Cell n = from + kNeighbors[uniform_index(rng, 4)];
        if (w.free(n) && w.semantic(n) == 0 && label[w.index(n)] == best) {
          w.set_semantic(n, cat);
          blob.push_back(n);
        }
      }
      goal.cells.insert(goal.cells.end(), blob.begin(), blob.end());
    }
    std::sort(goal.cells.begin(), goal.cells.end(),
              [](Cell a, Cell b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
    w.goals().push_back(std::move(goal));
  }
  return w;
}

}  // namespace

World generate_world(std::uint64_t seed, const WorldConfig& cfg) {
  if (cfg.width < 8 || cfg.height < 8) throw ConfigError("world: size must be at least 8x8");
  if (cfg.categories < 1) throw ConfigError("world: need at least one category");
  if (cfg.categories > 250) throw ConfigError("world: too many categories");
  if (cfg.clutter_density < 0.0 || cfg.clutter_density >= 1.0) {
    throw ConfigError("world: clutter density must be in [0, 1)");
  }
  if (cfg.instances_per_category < 1 || cfg.instance_cells < 1) {
    throw ConfigError("world: objects need at least one instance and one cell");
  }
  Rng rng(derive_seed(seed, "world"));
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    if (auto w = try_generate(seed, cfg, rng)) return *std::move(w);
  }
  throw ConfigError("world: could not satisfy reachability after " + std::to_string(cfg.max_retries) +
                    " attempts");
}

StepResult step(const World& world, const Pose& pose, Action a) {
  StepResult r{pose, false, false};
  switch (a) {
    case Action::Forward: {
      const Cell d = heading_vector(pose.heading);
      const Cell next{pose.cell.x + d.x, pose.cell.y + d.y};
      if (world.free(next)) {
        r.pose.cell = next;
      } else {
        r.collided = true;
      }
      break;
    }
    case Action::TurnLeft: r.pose.heading = turn_left(pose.heading); break;
    case Action::TurnRight: r.pose.heading = turn_right(pose.heading); break;
    case Action::Stop: r.stopped = true; break;
  }
  return r;
}

Cell ray_cell(const Pose& pose, int ray, int k, const SensorConfig& cfg) {
  const double frac = cfg.rays > 1 ? static_cast<double>(ray) / (cfg.rays - 1) - 0.5 : 0.0;
  const double alpha = frac * cfg.fov_deg * std::numbers::pi / 180.0;  // positive = clockwise
  const Cell f = heading_vector(pose.heading);
  const Cell r = heading_vector(turn_right(pose.heading));
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  const double dx = c * f.x + s * r.x;
  const double dy = c * f.y + s * r.y;
  return {pose.cell.x + static_cast<int>(std::lround(k * dx)),
          pose.cell.y + static_cast<int>(std::lround(k * dy))};
}

Observation observe(const World& world, const Pose& pose, const SensorConfig& cfg) {
  Observation obs;
  obs.pose = pose;
  obs.depth.resize(cfg.rays);
  obs.blocked.resize(cfg.rays);
  obs.hits.resize(cfg.rays);
  for (int i = 0; i < cfg.rays; ++i) {
    int depth = cfg.max_range;
    bool blocked = false;
    for (int k = 1; k <= cfg.max_range; ++k) {
      const Cell c = ray_cell(pose, i, k, cfg);
      if (!world.in_bounds(c) || world.obstacle(c)) {
        depth = k;
        blocked = true;
        break;
      }
    }
    RayHit hit{0, static_cast<float>(depth)};
    for (int k = 0; k <= depth; ++k) {
      const Cell c = ray_cell(pose, i, k, cfg);
      if (!world.in_bounds(c)) break;
      if (k == depth && !blocked) break;
      if (world.semantic(c) > 0) {
        hit = {world.semantic(c), static_cast<float>(k)};
        break;
      }
    }
    obs.depth[i] = static_cast<float>(depth);
    obs.blocked[i] = blocked ? 1 : 0;
    obs.hits[i] = hit;
  }
  return obs;
}

std::vector<int> distance_field(const World& world, std::span<const Cell> sources) {
  std::vector<int> dist(static_cast<std::size_t>(world.width()) * world.height(), kNoPath);
  std::deque<Cell> queue;
  for (const auto& s : sources) {
    if (world.free(s) && dist[world.index(s)] == kNoPath) {
      dist[world.index(s)] = 0;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    const int next = dist[world.index(c)] + 1;
    for (const auto& d : kNeighbors) {
      const Cell n = c + d;
      if (world.free(n) && dist[world.index(n)] == kNoPath) {
        dist[world.index(n)] = next;
        queue.push_back(n);
      }
    }
  }
  return dist;
}

float geodesic_distance(const World& world, Cell from, std::span<const Cell> goal_cells) {
  if (!world.free(from)) return kUnreachable;
  for (const auto& g : goal_cells) {
    if (g == from) return 0.0f;
  }
  const auto field = distance_field(world, goal_cells);
  const int d = field[world.index(from)];
  return d == kNoPath ? kUnreachable : static_cast<float>(d);
}

std::vector<Cell> spawnable_cells(const World& world) {
  auto [label, best] = free_components(world);
  std::vector<Cell> cells;
  if (best < 0) return cells;
  for (int y = 0; y < world.height(); ++y) {
    for (int x = 0; x < world.width(); ++x) {
      const Cell c{x, y};
      if (label[world.index(c)] == best && world.semantic(c) == 0) cells.push_back(c);
    }
  }
  return cells;
}

}  // namespace navlab
