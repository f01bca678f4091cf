#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <set>

#include "navlab/common.hpp"
#include "navlab/gridsim.hpp"

using namespace navlab;

namespace {

World empty_world(int w, int h, int categories = 1) { return World(w, h, 0, categories); }

// Plain Dijkstra with unit edges; deliberately shares nothing with the BFS.
float dijkstra(const World& world, Cell from, const std::vector<Cell>& goals) {
  const int w = world.width();
  const int h = world.height();
  std::vector<double> dist(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  auto ok = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && !world.obstacle({x, y}); };
  if (!ok(from.x, from.y)) return kUnreachable;
  dist[from.y * w + from.x] = 0;
  pq.push({0.0, from.y * w + from.x});
  std::set<int> goal_ids;
  for (auto g : goals) goal_ids.insert(g.y * w + g.x);
  while (!pq.empty()) {
    auto [d, id] = pq.top();
    pq.pop();
    if (d > dist[id]) continue;
    if (goal_ids.count(id)) return static_cast<float>(d);
    const int x = id % w, y = id / w;
    const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (!ok(nx, ny)) continue;
      const int nid = ny * w + nx;
      if (d + 1 < dist[nid]) {
        dist[nid] = d + 1;
        pq.push({d + 1, nid});
      }
    }
  }
  return kUnreachable;
}

}  // namespace

TEST_CASE("world generation is deterministic and seed sensitive") {
  const WorldConfig cfg;
  const auto a = generate_world(7, cfg);
  const auto b = generate_world(7, cfg);
  const auto c = generate_world(8, cfg);
  CHECK(a == b);
  CHECK(a.to_json().dump() == b.to_json().dump());
  bool differs = false;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) differs |= a.obstacle({x, y}) != c.obstacle({x, y});
  CHECK(differs);
}

TEST_CASE("generated worlds keep goals free and reachable from every spawnable cell") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto w = generate_world(seed, {});
    const auto spawn = spawnable_cells(w);
    REQUIRE_FALSE(spawn.empty());
    CHECK(w.goal_categories().size() == 6u);
    for (const auto& g : w.goals()) {
      for (auto c : g.cells) {
        CHECK(w.free(c));
        CHECK(w.semantic(c) == g.category);
      }
      CHECK(dijkstra(w, spawn.front(), g.cells) < kUnreachable);
    }
  }
}

TEST_CASE("undersized world config is rejected") {
  WorldConfig cfg;
  cfg.width = 4;
  CHECK_THROWS_AS(generate_world(1, cfg), ConfigError);
  cfg = {};
  cfg.categories = 0;
  CHECK_THROWS_AS(generate_world(1, cfg), ConfigError);
}

TEST_CASE("world json round trip") {
  const auto w = generate_world(3, {});
  CHECK(World::from_json(w.to_json()) == w);
  auto j = w.to_json();
  j.erase("occupancy");
  CHECK_THROWS_AS(World::from_json(j), FormatError);
}

TEST_CASE("step geometry") {
  auto w = empty_world(6, 6);
  auto r = step(w, {{2, 2}, Heading::E}, Action::Forward);
  CHECK(r.pose == Pose{{3, 2}, Heading::E});
  CHECK_FALSE(r.collided);
  CHECK(step(w, {{2, 2}, Heading::N}, Action::TurnRight).pose == Pose{{2, 2}, Heading::E});
  CHECK(step(w, {{2, 2}, Heading::N}, Action::TurnLeft).pose == Pose{{2, 2}, Heading::W});
  w.set_obstacle({3, 2}, true);
  r = step(w, {{2, 2}, Heading::E}, Action::Forward);
  CHECK(r.collided);
  CHECK(r.pose == Pose{{2, 2}, Heading::E});
  r = step(w, {{0, 0}, Heading::N}, Action::Forward);
  CHECK(r.collided);
  r = step(w, {{2, 2}, Heading::S}, Action::Stop);
  CHECK(r.stopped);
  CHECK(r.pose == Pose{{2, 2}, Heading::S});
}

TEST_CASE("observe: open room, wall ahead, object in front of wall") {
  SensorConfig s;
  auto w = empty_world(41, 41, 3);
  auto o = observe(w, {{20, 20}, Heading::N}, s);
  REQUIRE(o.depth.size() == 15u);
  for (auto d : o.depth) CHECK(d == 10.0f);
  for (auto b : o.blocked) CHECK(b == 0);

  w.set_obstacle({20, 17}, true);
  o = observe(w, {{20, 20}, Heading::N}, s);
  CHECK(o.depth[7] == 3.0f);
  CHECK(o.blocked[7] == 1);

  // Hand trace on the centre ray heading east: object at 2, wall at 5.
  auto w2 = empty_world(41, 41, 3);
  w2.set_semantic({22, 20}, 2);
  w2.set_obstacle({25, 20}, true);
  o = observe(w2, {{20, 20}, Heading::E}, s);
  CHECK(o.hits[7].category == 2);
  CHECK(o.hits[7].distance == 2.0f);
  CHECK(o.depth[7] == 5.0f);
  for (std::size_t i = 0; i < o.depth.size(); ++i) {
    CHECK(o.depth[i] >= 0.0f);
    if (o.hits[i].category > 0) CHECK(o.hits[i].distance <= o.depth[i]);
  }
}

TEST_CASE("geodesic distance examples") {
  auto w = empty_world(5, 5);
  const std::vector<Cell> goal{{0, 4}};
  CHECK(geodesic_distance(w, {0, 0}, goal) == 4.0f);
  CHECK(geodesic_distance(w, {0, 4}, goal) == 0.0f);
  for (int x = 0; x < 5; ++x) w.set_obstacle({x, 2}, true);
  CHECK(std::isinf(geodesic_distance(w, {0, 0}, goal)));
}

TEST_CASE("geodesic distance matches a Dijkstra oracle on 100 random worlds") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 8 + static_cast<int>(uniform_index(rng, 20));
    const int h = 8 + static_cast<int>(uniform_index(rng, 20));
    World world(w, h, 0, 1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (uniform01(rng) < 0.3) world.set_obstacle({x, y}, true);
    std::vector<Cell> goals;
    for (int k = 0; k < 3; ++k) goals.push_back({static_cast<int>(uniform_index(rng, w)), static_cast<int>(uniform_index(rng, h))});
    for (auto& g : goals) world.set_obstacle(g, false);
    for (int q = 0; q < 10; ++q) {
      const Cell from{static_cast<int>(uniform_index(rng, w)), static_cast<int>(uniform_index(rng, h))};
      if (world.obstacle(from)) continue;
      CHECK(geodesic_distance(world, from, goals) == dijkstra(world, from, goals));
    }
  }
}

TEST_CASE("forward changes distance by at most one, turns not at all") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto world = generate_world(seed, {});
    const auto goal = world.goal_cells(world.goal_categories().front());
    const std::vector<Cell> goals(goal.begin(), goal.end());
    Rng rng(seed);
    Pose pose{spawnable_cells(world).front(), Heading::N};
    const auto before = world;
    for (int t = 0; t < 300; ++t) {
      const auto a = static_cast<Action>(uniform_index(rng, 3));
      const auto d0 = geodesic_distance(world, pose.cell, goals);
      const auto r = step(world, pose, a);
      CHECK(r.pose == step(world, pose, a).pose);
      const auto d1 = geodesic_distance(world, r.pose.cell, goals);
      if (a == Action::Forward) {
        CHECK(std::abs(d1 - d0) <= 1.0f);
      } else {
        CHECK(d1 == d0);
      }
      pose = r.pose;
    }
    CHECK(world == before);
  }
}
