#pragma once

// Procedural gridworlds, agent kinematics, ray sensing and the BFS
// geodesic-distance oracle.

#include <array>
#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace navlab {

struct Cell {
  int x = 0;
  int y = 0;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

/// Grid headings. y grows downward, so North is -y.
enum class Heading : std::uint8_t { N = 0, E = 1, S = 2, W = 3 };

/// Fixed logit ordering; the vocabulary size is kNumActions.
enum class Action : std::uint8_t { Forward = 0, TurnLeft = 1, TurnRight = 2, Stop = 3 };
inline constexpr int kNumActions = 4;

struct Pose {
  Cell cell;
  Heading heading = Heading::N;
  friend constexpr bool operator==(const Pose&, const Pose&) = default;
};

constexpr Cell heading_vector(Heading h) {
  constexpr std::array<Cell, 4> kDirs{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};
  return kDirs[static_cast<int>(h)];
}
constexpr Heading turn_right(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }
constexpr Heading turn_left(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }

char action_symbol(Action a);
std::string_view action_name(Action a);
char heading_symbol(Heading h);

struct GoalObject {
  int category = 0;
  std::vector<Cell> cells;
  friend bool operator==(const GoalObject&, const GoalObject&) = default;
};

struct WorldConfig {
  int width = 32;
  int height = 32;
  int categories = 6;
  int instances_per_category = 2;
  int instance_cells = 3;
  double clutter_density = 0.04;
  int max_retries = 64;
};

/// Static gridworld. Immutable after generation.
class World {
 public:
  World() = default;
  World(int width, int height, std::uint64_t seed, int categories);

  int width() const { return width_; }
  int height() const { return height_; }
  int categories() const { return categories_; }
  std::uint64_t seed() const { return seed_; }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  bool obstacle(Cell c) const { return occupancy_[index(c)] != 0; }
  /// In bounds and not an obstacle.
  bool free(Cell c) const { return in_bounds(c) && !obstacle(c); }
  int semantic(Cell c) const { return semantic_[index(c)]; }

  void set_obstacle(Cell c, bool v) { occupancy_[index(c)] = v ? 1 : 0; }
  void set_semantic(Cell c, int category) { semantic_[index(c)] = static_cast<std::uint8_t>(category); }

  const std::vector<GoalObject>& goals() const { return goals_; }
  std::vector<GoalObject>& goals() { return goals_; }
  /// Goal cells of one category; empty if the category has no goal.
  std::span<const Cell> goal_cells(int category) const;
  /// Categories present in the goal list, ascending.
  std::vector<int> goal_categories() const;

  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * width_ + c.x; }

  nlohmann::json to_json() const;
  static World from_json(const nlohmann::json& j);

  friend bool operator==(const World&, const World&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int categories_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::uint8_t> occupancy_;
  std::vector<std::uint8_t> semantic_;
  std::vector<GoalObject> goals_;
};

/// Deterministic in `seed`. Throws ConfigError for undersized configs or
/// when reachability cannot be met within cfg.max_retries attempts.
World generate_world(std::uint64_t seed, const WorldConfig& cfg);

World load_world(const std::string& path);
void save_world(const World& world, const std::string& path);

struct StepResult {
  Pose pose;
  bool collided = false;
  bool stopped = false;
};

StepResult step(const World& world, const Pose& pose, Action a);

struct SensorConfig {
  int rays = 15;
  double fov_deg = 90.0;
  int max_range = 10;
};

struct RayHit {
  int category = 0;  // 0: nothing semantic seen on this ray
  float distance = 0.0f;
  friend bool operator==(const RayHit&, const RayHit&) = default;
};

struct Observation {
  std::vector<float> depth;
  /// Ray stopped at an obstacle or the world edge (rather than max range).
  std::vector<std::uint8_t> blocked;
  std::vector<RayHit> hits;
  Pose pose;
  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Cell sampled at distance k along ray `ray` from `pose` (unit-length
/// steps, rounded to the nearest cell). k = 0 is the agent cell.
Cell ray_cell(const Pose& pose, int ray, int k, const SensorConfig& cfg);

Observation observe(const World& world, const Pose& pose, const SensorConfig& cfg);

inline constexpr float kUnreachable = std::numeric_limits<float>::infinity();
inline constexpr int kNoPath = -1;

/// Multi-source 4-connected BFS over free cells; kNoPath where unreachable.
std::vector<int> distance_field(const World& world, std::span<const Cell> sources);

/// Shortest 4-connected path length from `from` to the nearest goal cell,
/// or kUnreachable.
float geodesic_distance(const World& world, Cell from, std::span<const Cell> goal_cells);

/// Free, non-semantic cells in the largest free component.
std::vector<Cell> spawnable_cells(const World& world);

}  // namespace navlab
