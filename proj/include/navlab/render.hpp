#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "navlab/mapper.hpp"

namespace navlab {

using Rgb = std::array<std::uint8_t, 3>;

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Rgb pixel(int x, int y) const;
  /// Binary PPM (P6).
  std::string to_ppm() const;
};

struct Palette {
  Rgb unknown{128, 128, 128};
  Rgb free{255, 255, 255};
  Rgb obstacle{0, 0, 0};
  Rgb agent{220, 30, 30};
  std::vector<Rgb> categories;  // index 0 is category 1

  static Palette standard(int categories);
  Rgb category(int c) const;
};

/// Semantic channels draw over obstacles, obstacles over free space.
/// Egocentric maps get an up-pointing agent arrow in the centre cell.
Image render_map(const SemanticMap& map, const Palette& palette, int cell_px = 4);

}  // namespace navlab
