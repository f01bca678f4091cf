#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "navlab/gridsim.hpp"

namespace navlab {

enum class MapFrame : std::uint8_t { Allocentric, Egocentric };

inline constexpr int kFreeChannel = 0;
inline constexpr int kObstacleChannel = 1;
/// Channel holding semantic category `category` (1-based).
constexpr int semantic_channel(int category) { return category + 1; }

/// (C+2) x M x M boolean channel tensor. Channel 0 is explored free space,
/// channel 1 obstacles, channels 2..C+1 the semantic categories.
///
/// An allocentric map is world-aligned and centred on `origin`; an
/// egocentric map is centred on the agent with its heading pointing up
/// (row index decreasing).
class SemanticMap {
 public:
  SemanticMap() = default;
  SemanticMap(int categories, int size, Cell origin, MapFrame frame);

  /// Allocentric map large enough to cover the whole world, centred on it.
  static SemanticMap covering(const World& world);

  int categories() const { return categories_; }
  int channels() const { return categories_ + 2; }
  int size() const { return size_; }
  Cell origin() const { return origin_; }
  MapFrame frame() const { return frame_; }

  bool get(int channel, int mx, int my) const { return bits_[offset(channel, mx, my)] != 0; }
  void set(int channel, int mx, int my, bool v = true) { bits_[offset(channel, mx, my)] = v ? 1 : 0; }
  bool contains(int mx, int my) const { return mx >= 0 && my >= 0 && mx < size_ && my < size_; }
  /// True if any channel is set at the cell.
  bool any(int mx, int my) const;
  bool any_semantic(int mx, int my) const;

  std::optional<Cell> to_map(Cell world) const;
  Cell to_world(Cell map) const;

  std::size_t count_set() const;
  /// Every bit set here is also set in `other` (same shape required).
  bool subset_of(const SemanticMap& other) const;

  std::span<const std::uint8_t> raw() const { return bits_; }

  /// "MUVM" binary layout (frame and origin are not part of it).
  void write(std::ostream& os) const;
  static SemanticMap read(std::istream& is, MapFrame frame = MapFrame::Egocentric);
  std::string to_bytes() const;

  friend bool operator==(const SemanticMap&, const SemanticMap&) = default;

 private:
  std::size_t offset(int channel, int mx, int my) const {
    return (static_cast<std::size_t>(channel) * size_ + my) * size_ + mx;
  }

  int categories_ = 0;
  int size_ = 0;
  Cell origin_{};
  MapFrame frame_ = MapFrame::Allocentric;
  std::vector<std::uint8_t> bits_;
};

/// OR the observation into an allocentric map. Bits are never cleared; a
/// cell already marked free is never marked obstacle and vice versa.
void update_map(SemanticMap& map, const Observation& obs, const Pose& pose, const SensorConfig& sensor);

inline constexpr int kDefaultWindow = 33;

/// Crop `window` x `window` around the agent and rotate so the heading is up.
SemanticMap egocentric_view(const SemanticMap& map, const Pose& pose, int window = kDefaultWindow);

/// Counter-clockwise quarter turn of a square map: out(i, j) = in(j, n-1-i).
SemanticMap rot90(const SemanticMap& map);

inline constexpr int kSectors = 8;
inline constexpr int kFreeBuckets = 4;
inline constexpr int kDescribeRange = 16;
inline constexpr std::size_t kRecentActions = 8;

struct SectorSummary {
  int nearest_category = 0;  // 0: none in range
  int free_bucket = 0;       // 0 blocked, 1 near, 2 mid, 3 open
  friend bool operator==(const SectorSummary&, const SectorSummary&) = default;
};

struct MapDescription {
  std::array<SectorSummary, kSectors> sectors{};  // clockwise from "ahead"
  std::vector<Action> recent_actions;              // oldest first, at most 8
  std::string text;
};

/// Free-space run length (in cells) to bucket: 0 -> 0, 1-2 -> 1, 3-5 -> 2, 6+ -> 3.
int free_bucket(int run_length);

/// Ego-frame grid offset of the bisector of `sector` as (forward, right).
Cell sector_bisector(int sector);

std::string_view sector_name(int sector);
std::string_view bucket_name(int bucket);
std::string category_name(int category);

MapDescription describe_map(const SemanticMap& map, const Pose& pose, std::span<const Action> recent,
                            int range = kDescribeRange);

std::string render_description(const std::array<SectorSummary, kSectors>& sectors,
                               std::span<const Action> recent);

}  // namespace navlab
