#include "navlab/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "navlab/common.hpp"

namespace navlab {

SemanticMap::SemanticMap(int categories, int size, Cell origin, MapFrame frame)
    : categories_(categories),
      size_(size),
      origin_(origin),
      frame_(frame),
      bits_(static_cast<std::size_t>(categories + 2) * size * size, 0) {
  if (categories < 1 || size < 1) throw ConfigError("semantic map: need >= 1 category and size >= 1");
}

SemanticMap SemanticMap::covering(const World& world) {
  int size = std::max(world.width(), world.height());
  if (size % 2 == 0) ++size;
  return SemanticMap(world.categories(), size, Cell{size / 2, size / 2}, MapFrame::Allocentric);
}

bool SemanticMap::any(int mx, int my) const {
  for (int ch = 0; ch < channels(); ++ch) {
    if (get(ch, mx, my)) return true;
  }
  return false;
}

bool SemanticMap::any_semantic(int mx, int my) const {
  for (int ch = 2; ch < channels(); ++ch) {
    if (get(ch, mx, my)) return true;
  }
  return false;
}

std::optional<Cell> SemanticMap::to_map(Cell world) const {
  const Cell m{world.x - origin_.x + size_ / 2, world.y - origin_.y + size_ / 2};
  if (!contains(m.x, m.y)) return std::nullopt;
  return m;
}

Cell SemanticMap::to_world(Cell map) const {
  return {map.x + origin_.x - size_ / 2, map.y + origin_.y - size_ / 2};
}

std::size_t SemanticMap::count_set() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool SemanticMap::subset_of(const SemanticMap& other) const {
  if (other.bits_.size() != bits_.size()) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

void SemanticMap::write(std::ostream& os) const {
  os.write("MUVM", 4);
  io::write_u16(os, 1);
  io::write_u16(os, static_cast<std::uint16_t>(categories_));
  io::write_u32(os, static_cast<std::uint32_t>(size_));
  std::string packed((bits_.size() + 7) / 8, '\0');
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1u << (i % 8)));
  }
  os.write(packed.data(), static_cast<std::streamsize>(packed.size()));
}

SemanticMap SemanticMap::read(std::istream& is, MapFrame frame) {
  io::expect_magic(is, "MUVM");
  if (io::read_u16(is) != 1) throw FormatError("MUVM: unsupported version");
  const int categories = io::read_u16(is);
  const auto size = io::read_u32(is);
  if (categories < 1 || size < 1 || size > 4096) throw FormatError("MUVM: bad dimensions");
  SemanticMap m(categories, static_cast<int>(size), Cell{static_cast<int>(size) / 2, static_cast<int>(size) / 2},
                frame);
  std::string packed((m.bits_.size() + 7) / 8, '\0');
  is.read(packed.data(), static_cast<std::streamsize>(packed.size()));
  if (!is) throw FormatError("MUVM: truncated channel data");
  for (std::size_t i = 0; i < m.bits_.size(); ++i) {
    m.bits_[i] = (static_cast<unsigned char>(packed[i / 8]) >> (i % 8)) & 1u;
  }
  return m;
}

std::string SemanticMap::to_bytes() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

void update_map(SemanticMap& map, const Observation& obs, const Pose& pose, const SensorConfig& sensor) {
  if (map.frame() != MapFrame::Allocentric) throw ConfigError("update_map: map must be allocentric");
  const auto mark_free = [&](Cell world) {
    if (auto m = map.to_map(world); m && !map.get(kObstacleChannel, m->x, m->y)) {
      map.set(kFreeChannel, m->x, m->y);
    }
  };
  const auto mark_obstacle = [&](Cell world) {
    if (auto m = map.to_map(world); m && !map.get(kFreeChannel, m->x, m->y)) {
      map.set(kObstacleChannel, m->x, m->y);
    }
  };
  const int rays = static_cast<int>(obs.depth.size());
  for (int i = 0; i < rays; ++i) {
    const int depth = static_cast<int>(std::lround(obs.depth[i]));
    for (int k = 0; k < depth; ++k) mark_free(ray_cell(pose, i, k, sensor));
    if (obs.blocked[i]) mark_obstacle(ray_cell(pose, i, depth, sensor));
    const RayHit& hit = obs.hits[i];
    if (hit.category > 0 && hit.category <= map.categories()) {
      const Cell c = ray_cell(pose, i, static_cast<int>(std::lround(hit.distance)), sensor);
      if (auto m = map.to_map(c)) map.set(semantic_channel(hit.category), m->x, m->y);
    }
  }
}

SemanticMap egocentric_view(const SemanticMap& map, const Pose& pose, int window) {
  if (window < 1 || window % 2 == 0) throw ConfigError("egocentric_view: window must be odd");
  SemanticMap ego(map.categories(), window, pose.cell, MapFrame::Egocentric);
  const Cell f = heading_vector(pose.heading);
  const Cell rt = heading_vector(turn_right(pose.heading));
  const int half = window / 2;
  for (int r = 0; r < window; ++r) {
    for (int c = 0; c < window; ++c) {
      const int ahead = half - r;
      const int right = c - half;
      const Cell world{pose.cell.x + ahead * f.x + right * rt.x, pose.cell.y + ahead * f.y + right * rt.y};
      const auto m = map.to_map(world);
      if (!m) continue;
      for (int ch = 0; ch < map.channels(); ++ch) {
        if (map.get(ch, m->x, m->y)) ego.set(ch, c, r);
      }
    }
  }
  return ego;
}

SemanticMap rot90(const SemanticMap& map) {
  SemanticMap out(map.categories(), map.size(), map.origin(), map.frame());
  const int n = map.size();
  for (int ch = 0; ch < map.channels(); ++ch) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        // row i, column j of the output reads row j, column n-1-i.
        if (map.get(ch, n - 1 - i, j)) out.set(ch, j, i);
      }
    }
  }
  return out;
}

int free_bucket(int run_length) {
  if (run_length <= 0) return 0;
  if (run_length <= 2) return 1;
  if (run_length <= 5) return 2;
  return 3;
}

Cell sector_bisector(int sector) {
  // (forward, right) pairs, clockwise from ahead.
  constexpr std::array<Cell, kSectors> kBisectors{
      {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};
  return kBisectors[static_cast<std::size_t>(sector)];
}

std::string_view sector_name(int sector) {
  constexpr std::array<std::string_view, kSectors> kNames{
      "ahead", "ahead-right", "right", "behind-right", "behind", "behind-left", "left", "ahead-left"};
  return kNames[static_cast<std::size_t>(sector)];
}

std::string_view bucket_name(int bucket) {
  constexpr std::array<std::string_view, kFreeBuckets> kNames{"blocked", "near", "mid", "open"};
  return kNames[static_cast<std::size_t>(bucket)];
}

std::string category_name(int category) {
  constexpr std::array<std::string_view, 7> kNames{"none", "chair", "bed", "plant", "toilet", "tv", "sofa"};
  if (category >= 0 && category < static_cast<int>(kNames.size())) return std::string(kNames[category]);
  return "cat" + std::to_string(category);
}

namespace {

// Octant of an ego-frame offset, clockwise from ahead. Boundaries sit at
// 22.5 degrees off each bisector; integer offsets never land on them.
int sector_of(int forward, int right) {
  constexpr double kTan22 = 0.41421356237309503;  // sqrt(2) - 1
  const double a = forward;
  const double b = right;
  if (a > 0 && std::abs(b) < kTan22 * a) return 0;
  if (a < 0 && std::abs(b) < kTan22 * -a) return 4;
  if (b > 0 && std::abs(a) < kTan22 * b) return 2;
  if (b < 0 && std::abs(a) < kTan22 * -b) return 6;
  if (a > 0) return b > 0 ? 1 : 7;
  return b > 0 ? 3 : 5;
}

}  // namespace

MapDescription describe_map(const SemanticMap& map, const Pose& pose, std::span<const Action> recent, int range) {
  if (map.frame() != MapFrame::Allocentric) throw ConfigError("describe_map: map must be allocentric");
  MapDescription d;
  const Cell f = heading_vector(pose.heading);
  const Cell rt = heading_vector(turn_right(pose.heading));

  // Nearest semantic cell per sector; key = (squared distance, category).
  std::array<std::pair<int, int>, kSectors> best;
  best.fill({INT32_MAX, 0});
  for (int oy = -range; oy <= range; ++oy) {
    for (int ox = -range; ox <= range; ++ox) {
      const int d2 = ox * ox + oy * oy;
      if (d2 == 0 || d2 > range * range) continue;
      const auto m = map.to_map({pose.cell.x + ox, pose.cell.y + oy});
      if (!m) continue;
      int cat = 0;
      for (int c = 1; c <= map.categories(); ++c) {
        if (map.get(semantic_channel(c), m->x, m->y)) {
          cat = c;
          break;
        }
      }
      if (cat == 0) continue;
      const int s = sector_of(ox * f.x + oy * f.y, ox * rt.x + oy * rt.y);
      best[s] = std::min(best[s], std::pair{d2, cat});
    }
  }

  for (int s = 0; s < kSectors; ++s) {
    d.sectors[s].nearest_category = best[s].second;
    const Cell b = sector_bisector(s);
    const Cell dir{b.x * f.x + b.y * rt.x, b.x * f.y + b.y * rt.y};
    int run = 0;
    for (int k = 1; k <= range; ++k) {
      const auto m = map.to_map({pose.cell.x + k * dir.x, pose.cell.y + k * dir.y});
      if (!m || !map.get(kFreeChannel, m->x, m->y)) break;
      run = k;
    }
    d.sectors[s].free_bucket = free_bucket(run);
  }

  const std::size_t keep = std::min(recent.size(), kRecentActions);
  d.recent_actions.assign(recent.end() - static_cast<std::ptrdiff_t>(keep), recent.end());
  d.text = render_description(d.sectors, d.recent_actions);
  return d;
}

std::string render_description(const std::array<SectorSummary, kSectors>& sectors, std::span<const Action> recent) {
  std::ostringstream os;
  for (int s = 0; s < kSectors; ++s) {
    if (s > 0) os << "; ";
    os << sector_name(s) << ": " << category_name(sectors[s].nearest_category) << " ("
       << bucket_name(sectors[s].free_bucket) << ")";
  }
  os << " | recent:";
  if (recent.empty()) os << " -";
  for (const auto a : recent) os << ' ' << action_symbol(a);
  return os.str();
}

}  // namespace navlab
