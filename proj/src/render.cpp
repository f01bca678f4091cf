#include "navlab/render.hpp"

#include "navlab/common.hpp"

namespace navlab {

Rgb Image::pixel(int x, int y) const {
  const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

std::string Image::to_ppm() const {
  std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
  return out;
}

Palette Palette::standard(int categories) {
  static constexpr std::array<Rgb, 6> kBase{{
      {31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {148, 103, 189}, {23, 190, 207}, {188, 189, 34}}};
  Palette p;
  for (int c = 0; c < categories; ++c) {
    Rgb col = kBase[static_cast<std::size_t>(c) % kBase.size()];
    // Darken repeats so categories beyond the base set stay distinct.
    const int shade = c / static_cast<int>(kBase.size());
    for (auto& v : col) v = static_cast<std::uint8_t>(v / (1 + shade));
    p.categories.push_back(col);
  }
  return p;
}

Rgb Palette::category(int c) const {
  if (c < 1 || c > static_cast<int>(categories.size())) return {255, 0, 255};
  return categories[static_cast<std::size_t>(c - 1)];
}

Image render_map(const SemanticMap& map, const Palette& palette, int cell_px) {
  if (cell_px < 1) throw ConfigError("render_map: cell size must be positive");
  Image img;
  img.width = map.size() * cell_px;
  img.height = map.size() * cell_px;
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);

  const auto fill = [&](int px, int py, Rgb col) {
    const auto i = (static_cast<std::size_t>(py) * img.width + px) * 3;
    img.rgb[i] = col[0];
    img.rgb[i + 1] = col[1];
    img.rgb[i + 2] = col[2];
  };

  for (int my = 0; my < map.size(); ++my) {
    for (int mx = 0; mx < map.size(); ++mx) {
      Rgb col = palette.unknown;
      if (map.get(kFreeChannel, mx, my)) col = palette.free;
      if (map.get(kObstacleChannel, mx, my)) col = palette.obstacle;
      for (int c = 1; c <= map.categories(); ++c) {
        if (map.get(semantic_channel(c), mx, my)) {
          col = palette.category(c);
          break;
        }
      }
      for (int dy = 0; dy < cell_px; ++dy) {
        for (int dx = 0; dx < cell_px; ++dx) fill(mx * cell_px + dx, my * cell_px + dy, col);
      }
    }
  }

  if (map.frame() == MapFrame::Egocentric) {
    // Triangle with its apex on the top edge of the centre cell.
    const int c = map.size() / 2;
    const int x0 = c * cell_px;
    const int y0 = c * cell_px;
    const double mid = (cell_px - 1) / 2.0;
    for (int dy = 0; dy < cell_px; ++dy) {
      const double half_width = (cell_px > 1 ? static_cast<double>(dy) / (cell_px - 1) : 1.0) * mid;
      for (int dx = 0; dx < cell_px; ++dx) {
        if (std::abs(dx - mid) <= half_width + 0.5) fill(x0 + dx, y0 + dy, palette.agent);
      }
    }
  }
  return img;
}

}  // namespace navlab
