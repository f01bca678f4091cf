#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance runner. Nothing here calls the code it is checking.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "navlab/common.hpp"
#include "navlab/gridsim.hpp"
#include "navlab/mapper.hpp"
#include "navlab/nnet/tensor.hpp"

namespace navlab::oracle {

inline World random_world(Rng& rng, int size, int categories, double obstacle_p, double semantic_p) {
  World w(size, size, 0, categories);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (uniform01(rng) < obstacle_p) w.set_obstacle({x, y}, true);
      if (uniform01(rng) < semantic_p) w.set_semantic({x, y}, 1 + static_cast<int>(uniform_index(rng, categories)));
    }
  }
  return w;
}

inline Pose random_pose(Rng& rng, const World& w) {
  for (;;) {
    const Cell c{static_cast<int>(uniform_index(rng, w.width())), static_cast<int>(uniform_index(rng, w.height()))};
    if (w.free(c)) return {c, static_cast<Heading>(uniform_index(rng, 4))};
  }
}

// Independent rotation: the output cell (x, y) reads input (n-1-y, x)
// when viewed as a counter-clockwise quarter turn.
inline SemanticMap rotate_ccw(const SemanticMap& m) {
  const int n = m.size();
  SemanticMap out(m.categories(), n, m.origin(), m.frame());
  for (int ch = 0; ch < m.channels(); ++ch)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        if (m.get(ch, x, y)) out.set(ch, y, n - 1 - x);
  return out;
}

// Octant by atan2 of (right, forward), clockwise from ahead.
inline int sector_by_angle(int forward, int right) {
  double deg = std::atan2(static_cast<double>(right), static_cast<double>(forward)) * 180.0 / M_PI;
  if (deg < 0) deg += 360.0;
  return static_cast<int>(std::floor((deg + 22.5) / 45.0)) % 8;
}

inline std::array<SectorSummary, kSectors> brute_describe(const SemanticMap& map, const Pose& pose, int range) {
  std::array<SectorSummary, kSectors> out{};
  std::array<int, kSectors> best_d2;
  best_d2.fill(1 << 30);
  const Cell f = heading_vector(pose.heading);
  const Cell r = heading_vector(turn_right(pose.heading));
  for (int my = 0; my < map.size(); ++my) {
    for (int mx = 0; mx < map.size(); ++mx) {
      const Cell w = map.to_world({mx, my});
      const int dx = w.x - pose.cell.x, dy = w.y - pose.cell.y;
      const int d2 = dx * dx + dy * dy;
      if (d2 == 0 || d2 > range * range) continue;
      const int fwd = dx * f.x + dy * f.y;
      const int rgt = dx * r.x + dy * r.y;
      const int s = sector_by_angle(fwd, rgt);
      for (int c = 1; c <= map.categories(); ++c) {
        if (!map.get(semantic_channel(c), mx, my)) continue;
        if (d2 < best_d2[s] || (d2 == best_d2[s] && c < out[s].nearest_category)) {
          best_d2[s] = d2;
          out[s].nearest_category = c;
        }
      }
    }
  }
  const int bis[8][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
  for (int s = 0; s < 8; ++s) {
    const int wx = bis[s][0] * f.x + bis[s][1] * r.x;
    const int wy = bis[s][0] * f.y + bis[s][1] * r.y;
    int run = 0;
    for (int k = 1; k <= range; ++k) {
      auto m = map.to_map({pose.cell.x + k * wx, pose.cell.y + k * wy});
      if (!m || !map.get(kFreeChannel, m->x, m->y)) break;
      run = k;
    }
    out[s].free_bucket = run == 0 ? 0 : run <= 2 ? 1 : run <= 5 ? 2 : 3;
  }
  return out;
}

inline std::vector<double> rtg_double_loop(const std::vector<double>& r, double gamma, int window) {
  std::vector<double> out(r.size());
  for (std::size_t t = 0; t < r.size(); ++t) {
    double s = 0.0;
    for (int k = 0; k < window; ++k) {
      if (t + k >= r.size()) continue;
      s += std::pow(gamma, k) * r[t + k];
    }
    out[t] = s;
  }
  return out;
}

// Golden-section search of a unimodal function on [lo, hi].
inline double minimize_1d(const std::function<double(double)>& f, double lo, double hi) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  for (int i = 0; i < 200; ++i) {
    const double c = b - phi * (b - a), d = a + phi * (b - a);
    if (f(c) < f(d)) b = d; else a = c;
  }
  return 0.5 * (a + b);
}

// Plain per-row log-sum-exp, written without the graph.
inline double row_ce(const nn::Tensor& t, std::size_t row, int label) {
  double m = -1e300;
  for (std::size_t c = 0; c < t.cols(); ++c) m = std::max(m, t(row, c));
  double s = 0;
  for (std::size_t c = 0; c < t.cols(); ++c) s += std::exp(t(row, c) - m);
  return m + std::log(s) - t(row, static_cast<std::size_t>(label));
}

}  // namespace navlab::oracle
