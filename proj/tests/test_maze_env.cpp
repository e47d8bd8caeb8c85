// Copyright 2026 The ItorL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "itorl/demo_gen.hpp"
#include "itorl/errors.hpp"
#include "itorl/maze_env.hpp"
#include "test_support.hpp"

using namespace itorl;

namespace {

// Outer boundary only: one open room spanning the whole lattice.
MazeMap open_room(int grid_size, int path_width = 2) {
  const double lo = 0.5 * path_width;
  const double hi = grid_size - lo;
  std::vector<Segment> walls = {{{lo, lo}, {hi, lo}}, {{hi, lo}, {hi, hi}}, {{hi, hi}, {lo, hi}}, {{lo, hi}, {lo, lo}}};
  return MazeMap("room", 0, grid_size, path_width, walls, {0.5 * grid_size, 0.5 * grid_size});
}

TaskParams task_on(const MazeMap& m, Vec2 goal) {
  TaskParams t;
  t.map = std::make_shared<const MazeMap>(m);
  t.goal = goal;
  return t;
}

Demonstration long_demo(const MazeMap& map, int min_steps) {
  DemoGenConfig cfg;
  cfg.max_step = 0.5;
  cfg.options.horizon = 200;
  for (std::uint64_t s = 0; s < 50; ++s) {
    for (auto& d : generate_demos(map, 5, Rng(s), cfg)) {
      if (d.steps() >= min_steps) return d;
    }
  }
  FAIL("no long demo found");
  return {};
}

}  // namespace

TEST_CASE("generate_maze is deterministic and connected") {
  const auto a = generate_maze(7, 24, 2);
  const auto b = generate_maze(7, 24, 2);
  CHECK(a.walls() == b.walls());
  CHECK(a.start() == b.start());
  CHECK(a.map_id() == b.map_id());
  CHECK(testing::flood_fill_reachable(a) == a.lattice_size() * a.lattice_size());
  CHECK(a.start() == Vec2{12.0, 12.0});
  const auto c = generate_maze(8, 24, 2);
  CHECK(a.walls() != c.walls());
}

TEST_CASE("every generated maze is connected") {
  for (int g : {8, 12, 24}) {
    int connected = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
      const auto m = generate_maze(s, g, 2);
      connected += testing::flood_fill_reachable(m) == m.lattice_size() * m.lattice_size();
    }
    CHECK(connected == 1000);
  }
}

TEST_CASE("smallest maze is a single open room") {
  const auto m = generate_maze(3, 4, 2);
  CHECK(m.lattice_size() == 1);
  CHECK(m.interior_wall_count() == 0);
  CHECK(m.inside_bounds(m.start()));
}

TEST_CASE("generate_maze rejects invalid dimensions") {
  CHECK_THROWS_AS(generate_maze(1, 10, 2), ConfigError);
  CHECK_THROWS_AS(generate_maze(1, 2, 2), ConfigError);
  CHECK_THROWS_AS(generate_maze(1, 8, 0), ConfigError);
  CHECK_THROWS_AS(generate_maze(1, 7, 1), ConfigError);
}

TEST_CASE("start lies strictly inside a path cell") {
  for (int g : {8, 12, 24}) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto m = generate_maze(s, g, 2);
      const auto cell = m.cell_at(m.start());
      REQUIRE(cell.has_value());
      CHECK(distance(m.cell_center(*cell), m.start()) < 1e-12);
      for (const auto& w : m.walls()) CHECK(point_segment_distance(m.start(), w) >= 0.999);
    }
  }
}

TEST_CASE("walls never cut through an open passage") {
  const auto m = generate_maze(11, 12, 2);
  const int n = m.lattice_size();
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      for (const auto& nb : m.open_neighbors({c, r})) {
        const Segment link{m.cell_center({c, r}), m.cell_center(nb)};
        for (const auto& w : m.walls()) CHECK_FALSE(testing::crosses(link.a, link.b, w.a, w.b));
      }
    }
  }
}

TEST_CASE("ray_cast on axis-aligned geometry") {
  const auto room = open_room(8);  // walls at x, y in {1, 7}
  SUBCASE("east wall three units away") {
    const auto rays = ray_cast(room, {}, {4.0, 4.0}, 8, 5.0);
    CHECK(rays[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(rays[2] == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("diagonal ray to a wall two units east") {
    const auto rays = ray_cast(room, {}, {5.0, 4.0}, 8, 5.0);
    CHECK(rays[1] == doctest::Approx(2.0 * std::numbers::sqrt2).epsilon(1e-12));
    const Segment plane{{7.0, 1.0}, {7.0, 7.0}};
    CHECK(testing::march_ray(std::span(&plane, 1), {5.0, 4.0}, std::numbers::pi / 4, 5.0) ==
          doctest::Approx(2.0 * std::numbers::sqrt2).epsilon(1e-3));
  }
  SUBCASE("nothing in range clamps every ray") {
    const auto big = open_room(24);
    for (double d : ray_cast(big, {}, {12.0, 12.0}, 8, 5.0)) CHECK(d == 5.0);
  }
  SUBCASE("obstacles block rays") {
    Obstacle o;
    o.center = {5.0, 4.0};
    o.length = 1.2;
    const std::vector<Obstacle> obs{o};
    const auto rays = ray_cast(room, obs, {3.0, 4.0}, 8, 5.0);
    CHECK(rays[0] == doctest::Approx(2.0 - 0.6).epsilon(1e-12));
  }
  SUBCASE("position on a wall is a precondition violation") {
    CHECK_THROWS_AS(ray_cast(room, {}, {7.0, 4.0}, 8, 5.0), PreconditionError);
  }
}

TEST_CASE("ray_cast agrees with a fine ray marcher") {
  const auto m = generate_maze(5, 12, 2);
  Rng rng(99);
  const auto segs = testing::blocking_segments(m, {});
  const Scene scene{&m, {}};
  int checked = 0;
  int agreeing = 0;
  while (checked < 10000) {
    const Vec2 p{rng.uniform(1.0, 11.0), rng.uniform(1.0, 11.0)};
    if (!scene.free(p)) continue;
    const auto rays = ray_cast(m, {}, p, 8, 5.0);
    for (int k = 0; k < 8; ++k) {
      const double marched = testing::march_ray(segs, p, 2.0 * std::numbers::pi * k / 8, 5.0);
      agreeing += std::abs(marched - rays[static_cast<std::size_t>(k)]) <= 2e-3;
    }
    ++checked;
  }
  CHECK(agreeing == 8 * checked);
}

TEST_CASE("spawn_obstacles") {
  const auto m = generate_maze(2, 12, 2);
  const auto demo = long_demo(m, 30);
  SUBCASE("p = 0 spawns nothing") { CHECK(spawn_obstacles(m, demo, Rng(1), 0.0, 4).empty()); }
  SUBCASE("p = 1 fills the cap at the first eligible steps") {
    const auto obs = spawn_obstacles(m, demo, Rng(1), 1.0, 4);
    REQUIRE(obs.size() == 4);
    std::vector<Vec2> expected;
    for (int k = 0; k < demo.steps() && expected.size() < 4; ++k) {
      Obstacle probe;
      probe.center = demo.pairs[static_cast<std::size_t>(k + 1)].state.position;
      const auto& a = demo.pairs[static_cast<std::size_t>(k)].action;
      probe.orientation = std::atan2(a.dy, a.dx);
      probe.length = 1.3;
      if (probe.rect().contains(m.start()) || probe.rect().contains(demo.goal)) continue;
      expected.push_back(probe.center);
    }
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(obs[i].center == expected[i]);
      CHECK(obs[i].length >= 1.1);
      CHECK(obs[i].length <= 1.3);
      CHECK(obs[i].width == 1.35);
      // Straddles the demo path.
      const auto& p = demo.positions();
      bool overlaps = false;
      for (std::size_t j = 0; j + 1 < p.size(); ++j) overlaps |= obs[i].rect().intersects({p[j], p[j + 1]});
      CHECK(overlaps);
    }
  }
  SUBCASE("same seed gives the same layout") {
    const auto a = spawn_obstacles(m, demo, Rng(5), 0.3, 4);
    const auto b = spawn_obstacles(m, demo, Rng(5), 0.3, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].center == b[i].center);
      CHECK(a[i].length == b[i].length);
    }
  }
  SUBCASE("obstacle count follows the capped binomial law") {
    const int n = eligible_obstacle_steps(m, demo);
    REQUIRE(n >= 20);
    const auto [mean, var] = testing::capped_binomial_moments(n, 0.1, 4);
    const int trials = 10000;
    double sum = 0.0;
    for (int s = 0; s < trials; ++s) {
      sum += static_cast<double>(spawn_obstacles(m, demo, Rng(static_cast<std::uint64_t>(s)), 0.1, 4).size());
    }
    const double sigma = std::sqrt(var / trials);
    CHECK(std::abs(sum / trials - mean) <= 3.0 * sigma);
  }
}

TEST_CASE("resets") {
  const auto m = generate_maze(4, 12, 2);
  DemoGenConfig cfg;
  const auto demo = generate_demos(m, 1, Rng(3), cfg).front();
  const auto task = task_on(m, demo.goal);
  ObservationConfig obs;
  SUBCASE("evaluation starts at the map center") {
    const auto s = reset_for_evaluation(task, {}, obs);
    CHECK(s.position == m.start());
    CHECK(s.t == 0);
    CHECK(s.local_view.size() == 8);
  }
  SUBCASE("zero disturbance lands on a demo state") {
    Rng a(1), b(2);
    ResetOptions opts;
    opts.disturbance = 0.0;
    for (int i = 0; i < 50; ++i) {
      const auto s = reset_for_training(task, demo, {}, obs, a, b, opts);
      bool on_demo = false;
      for (const auto& p : demo.pairs) on_demo |= p.state.position == s.position;
      CHECK(on_demo);
    }
  }
  SUBCASE("disturbance has standard deviation 0.1 per axis") {
    Rng a(1), b(2);
    ResetOptions opts;
    double sx = 0.0, sy = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      Rng idx = a;  // replay the index draw to recover the anchor
      const auto s = reset_for_training(task, demo, {}, obs, a, b, opts);
      const Scene scene{&m, {}};
      std::vector<std::size_t> free_idx;
      for (std::size_t k = 0; k < demo.pairs.size(); ++k) {
        if (scene.free(demo.pairs[k].state.position)) free_idx.push_back(k);
      }
      const Vec2 anchor = demo.pairs[free_idx[idx.below(free_idx.size())]].state.position;
      sx += (s.position.x - anchor.x) * (s.position.x - anchor.x);
      sy += (s.position.y - anchor.y) * (s.position.y - anchor.y);
    }
    CHECK(std::sqrt(sx / n) == doctest::Approx(0.1).epsilon(0.1));
    CHECK(std::sqrt(sy / n) == doctest::Approx(0.1).epsilon(0.1));
  }
}

TEST_CASE("step outcomes") {
  const auto room = open_room(8);
  ObservationConfig obs;
  auto task = task_on(room, {6.0, 6.0});
  const auto s0 = reset_at(task, {}, obs, {4.0, 4.0});
  SUBCASE("crossing a wall is fatal and keeps the position") {
    const auto s = reset_at(task, {}, obs, {6.5, 4.0});
    const auto out = step(s, {1.0, 0.0}, task, {}, obs, 1.0);
    CHECK(out.status == Status::Dead);
    CHECK(out.ending_reward == -1.0);
    CHECK(out.next_state.position == s.position);
  }
  SUBCASE("no tunneling through an obstacle") {
    Obstacle o;
    o.center = {4.5, 4.0};
    o.length = 0.01;
    const std::vector<Obstacle> obstacles{o};
    const auto out = step(s0, {1.0, 0.0}, task, obstacles, obs, 1.0);
    CHECK(out.status == Status::Dead);
  }
  SUBCASE("reaching the goal radius succeeds") {
    const auto s = reset_at(task, {}, obs, {5.0, 5.6});
    const auto out = step(s, {0.7, 0.2}, task, {}, obs, 2.5);
    CHECK(out.status == Status::Success);
    CHECK(out.ending_reward == 2.5);
  }
  SUBCASE("horizon exhausted times out") {
    task.horizon = 50;
    EnvState s = s0;
    StepOutcome out;
    for (int t = 0; t < 50; ++t) {
      const double dir = (t % 2 == 0) ? 0.5 : -0.5;
      out = step(s, {dir, 0.0}, task, {}, obs, 1.0);
      if (t < 49) REQUIRE(out.status == Status::Running);
      s = out.next_state;
    }
    CHECK(out.status == Status::Timeout);
    CHECK(out.ending_reward == 0.0);
    CHECK(out.next_state.t == 50);
  }
  SUBCASE("actions outside the unit box are rejected") {
    CHECK_THROWS_AS(step(s0, {1.5, 0.0}, task, {}, obs, 1.0), InputError);
    CHECK_THROWS_AS(step(s0, {0.0, std::nan("")}, task, {}, obs, 1.0), InputError);
  }
  SUBCASE("step is deterministic") {
    const auto a = step(s0, {0.3, -0.2}, task, {}, obs, 1.0);
    const auto b = step(s0, {0.3, -0.2}, task, {}, obs, 1.0);
    CHECK(a.next_state.position == b.next_state.position);
    CHECK(a.next_state.local_view == b.next_state.local_view);
  }
}
