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
#include <set>

#include "itorl/demo_gen.hpp"
#include "itorl/errors.hpp"
#include "test_support.hpp"

using namespace itorl;

namespace {

struct Replay {
  Status status = Status::Running;
  double max_error = 0.0;
};

Replay replay(const MazeMap& map, const Demonstration& d) {
  TaskParams task;
  task.map = std::make_shared<const MazeMap>(map);
  task.goal = d.goal;
  task.goal_radius = d.goal_radius;
  ObservationConfig obs;
  EnvState s = reset_at(task, {}, obs, d.pairs.front().state.position);
  Replay r;
  for (int k = 0; k < d.steps(); ++k) {
    const auto out = step(s, d.pairs[static_cast<std::size_t>(k)].action, task, {}, obs, 1.0);
    s = out.next_state;
    const auto& ref = d.pairs[static_cast<std::size_t>(k + 1)].state;
    r.max_error = std::max(r.max_error, distance(s.position, ref.position));
    for (std::size_t i = 0; i < s.local_view.size(); ++i) {
      r.max_error = std::max(r.max_error, std::abs(s.local_view[i] - ref.local_view[i]));
    }
    r.status = out.status;
    if (out.status != Status::Running) break;
  }
  return r;
}

}  // namespace

TEST_CASE("plan_path trivial cases") {
  const auto room = generate_maze(3, 4, 2);
  CHECK(plan_path(room, room.start(), room.start()) == std::vector<Vec2>{room.start()});
  const auto m = generate_maze(1, 12, 2);
  const Vec2 corner = m.cell_center({0, 0});
  const auto path = plan_path(m, m.start(), corner);
  CHECK(path.front() == m.start());
  CHECK(path.back() == corner);
  CHECK_THROWS_AS(plan_path(m, m.start(), {0.2, 0.2}), PlanningError);
}

TEST_CASE("open room path is a single straight segment") {
  const auto room = generate_maze(3, 4, 2);
  const Vec2 corner{1.5, 1.5};
  const auto path = plan_path(room, room.start(), corner);
  CHECK(path == std::vector<Vec2>{room.start(), corner});
}

TEST_CASE("planned polylines never cross walls") {
  Rng rng(21);
  int clean = 0;
  for (int i = 0; i < 500; ++i) {
    const auto m = generate_maze(rng(), 12, 2);
    const Vec2 goal = sample_goal(m, rng);
    const auto path = plan_path(m, m.start(), goal);
    bool ok = true;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      for (const auto& w : m.walls()) ok &= !testing::crosses(path[k], path[k + 1], w.a, w.b);
    }
    clean += ok;
  }
  CHECK(clean == 500);
}

TEST_CASE("synthesize_demo subdivision") {
  const std::vector<Segment> walls = {{{1, 1}, {7, 1}}, {{7, 1}, {7, 7}}, {{7, 7}, {1, 7}}, {{1, 7}, {1, 1}}};
  const MazeMap room("room", 0, 8, 2, walls, {4, 4});
  DemoOptions opts;
  opts.goal_radius = 1e-9;
  const std::vector<Vec2> line = {{2, 4}, {4, 4}};
  SUBCASE("length 2 at max_step 1 takes two unit actions") {
    const auto d = synthesize_demo(room, line, 1.0, opts);
    REQUIRE(d.steps() == 2);
    for (int k = 0; k < 2; ++k) {
      CHECK(d.pairs[static_cast<std::size_t>(k)].action.dx == doctest::Approx(1.0));
      CHECK(d.pairs[static_cast<std::size_t>(k)].action.dy == 0.0);
    }
    CHECK(replay(room, d).status == Status::Success);
  }
  SUBCASE("halving max_step doubles the length") {
    const auto a = synthesize_demo(room, line, 1.0, opts);
    const auto b = synthesize_demo(room, line, 0.5, opts);
    CHECK(b.steps() == 2 * a.steps());
    CHECK(b.pairs[0].action.dx == doctest::Approx(0.5 * a.pairs[0].action.dx));
  }
  SUBCASE("too long for the horizon") {
    opts.horizon = 3;
    CHECK_THROWS_AS(synthesize_demo(room, std::vector<Vec2>{{2, 2}, {6, 6}}, 0.5, opts), DemoTooLongError);
  }
  SUBCASE("max_step above the action bound") {
    CHECK_THROWS_AS(synthesize_demo(room, line, 1.5, opts), ConfigError);
  }
}

TEST_CASE("synthesized demos replay to success") {
  int ok = 0, total = 0;
  for (std::uint64_t s = 0; s < 25; ++s) {
    const auto m = generate_maze(s, 12, 2);
    for (const auto& d : generate_demos(m, 20, Rng(s + 100), {})) {
      ++total;
      const auto r = replay(m, d);
      bool valid = r.status == Status::Success && r.max_error <= 1e-6 && d.steps() <= 50;
      for (const auto& p : d.pairs) {
        valid &= std::abs(p.action.dx) <= 1.0 && std::abs(p.action.dy) <= 1.0;
        valid &= !m.on_wall(p.state.position, 1e-9);
      }
      ok += valid;
    }
  }
  CHECK(total == 500);
  CHECK(ok == total);
}

TEST_CASE("sampled goals are far enough from the start") {
  const auto m = generate_maze(4, 24, 2);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Vec2 g = sample_goal(m, rng);
    const auto path = plan_path(m, m.start(), g);
    // Four grid cells of graph distance means at least two lattice hops.
    CHECK(path.size() >= 3);
    for (const auto& w : m.walls()) CHECK(point_segment_distance(g, w) >= 0.5 - 1e-12);
  }
}

TEST_CASE("oracle policy") {
  const auto m = generate_maze(9, 12, 2);
  const auto demos = generate_demos(m, 10, Rng(1), {});
  ObservationConfig obs;
  SUBCASE("on-path steps follow the demo or skip ahead along a clear line") {
    for (const auto& d : demos) {
      TaskParams task;
      task.map = std::make_shared<const MazeMap>(m);
      task.goal = d.goal;
      const Scene scene{&m, {}};
      for (int i = 0; i < d.steps(); ++i) {
        const auto& s = d.pairs[static_cast<std::size_t>(i)].state;
        const auto dec = oracle_policy(s, d, scene, task);
        REQUIRE(dec.target_index > i);
        if (dec.target_index == i + 1) {
          CHECK(dec.action.dx == doctest::Approx(d.pairs[static_cast<std::size_t>(i)].action.dx));
          CHECK(dec.action.dy == doctest::Approx(d.pairs[static_cast<std::size_t>(i)].action.dy));
        }
        CHECK_FALSE(scene.segment_blocked(
            {s.position, d.pairs[static_cast<std::size_t>(dec.target_index)].state.position}));
      }
    }
  }
  SUBCASE("at the goal the oracle stands still") {
    const auto& d = demos.front();
    TaskParams task;
    task.map = std::make_shared<const MazeMap>(m);
    task.goal = d.goal;
    const auto dec = oracle_policy(reset_at(task, {}, obs, d.goal), d, {&m, {}}, task);
    CHECK(dec.action == Action{});
  }
}

TEST_CASE("oracle succeeds on every obstacle-free task") {
  int successes = 0, tasks = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto m = std::make_shared<const MazeMap>(generate_maze(s, 12, 2));
    for (const auto& d : generate_demos(*m, 10, Rng(s), {})) {
      TaskParams task;
      task.map = m;
      task.goal = d.goal;
      EnvState st = reset_for_evaluation(task, {}, {});
      Status status = Status::Running;
      while (status == Status::Running) {
        const auto dec = oracle_policy(st, d, {m.get(), {}}, task);
        const auto out = step(st, dec.action, task, {}, {}, 1.0);
        st = out.next_state;
        status = out.status;
      }
      ++tasks;
      successes += status == Status::Success;
    }
  }
  CHECK(tasks == 100);
  CHECK(successes == 100);
}

TEST_CASE("oracle with default obstacles") {
  int successes = 0, episodes = 0, stuck = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto m = std::make_shared<const MazeMap>(generate_maze(s, 12, 2));
    for (const auto& d : generate_demos(*m, 10, Rng(s), {})) {
      TaskParams task;
      task.map = m;
      task.goal = d.goal;
      const auto obstacles = spawn_obstacles(*m, d, Rng(s * 1000 + static_cast<std::uint64_t>(episodes)), 0.1, 4);
      EnvState st = reset_for_evaluation(task, obstacles, {});
      Status status = Status::Running;
      while (status == Status::Running) {
        const auto dec = oracle_policy(st, d, {m.get(), obstacles}, task);
        stuck += dec.stuck;
        const auto out = step(st, dec.action, task, obstacles, {}, 1.0);
        st = out.next_state;
        status = out.status;
      }
      ++episodes;
      successes += status == Status::Success;
    }
  }
  MESSAGE("oracle with obstacles: " << successes << "/" << episodes << ", stuck decisions " << stuck);
  CHECK(static_cast<double>(successes) / episodes >= 0.95);
}

TEST_CASE("split_dataset") {
  std::vector<Demonstration> demos;
  for (int m = 0; m < 12; ++m) {
    for (int k = 0; k < 300; ++k) {
      Demonstration d;
      d.map_id = "m" + std::to_string(m);
      d.demo_id = d.map_id + "-" + std::to_string(k);
      d.goal = {static_cast<double>(k), 0.0};
      demos.push_back(d);
    }
  }
  SUBCASE("per-map floor rounding") {
    const auto split = split_dataset(std::span(demos).subspan(0, 300), {0.9, 0}, {}, 1);
    CHECK(split.train.size() == 270);
    CHECK(split.eval_new_demo.size() == 30);
    CHECK(split.eval_new_map.empty());
    const auto odd = split_dataset(std::span(demos).subspan(0, 29), {0.5, 0}, {}, 1);
    CHECK(odd.train.size() == 14);
  }
  SUBCASE("held-out maps only feed the new-map split") {
    std::set<std::string> held;
    for (int m = 2; m < 12; ++m) held.insert("m" + std::to_string(m));
    const auto split = split_dataset(demos, {0.9, 0}, held, 1);
    CHECK(split.train.size() == 540);
    CHECK(split.eval_new_map.size() == 3000);
    for (const auto& d : split.train) CHECK(held.count(d.map_id) == 0);
    std::set<std::pair<std::string, double>> seen;
    for (const auto* part : {&split.train, &split.eval_new_demo, &split.eval_new_map}) {
      for (const auto& d : *part) CHECK(seen.insert({d.map_id, d.goal.x}).second);
    }
  }
  SUBCASE("train_per_map fixes the training count") {
    const auto split = split_dataset(demos, {0.9, 10}, {}, 4);
    CHECK(split.train.size() == 120);
    const auto all = split_dataset(demos, {0.5, 1000}, {}, 4);
    CHECK(all.train.size() == demos.size());
    CHECK(all.eval_new_demo.empty());
  }
  SUBCASE("determinism") {
    const auto a = split_dataset(demos, {0.9, 0}, {"m3"}, 7);
    const auto b = split_dataset(demos, {0.9, 0}, {"m3"}, 7);
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].demo_id == b.train[i].demo_id);
    const auto c = split_dataset(demos, {0.9, 0}, {"m3"}, 8);
    bool differs = false;
    for (std::size_t i = 0; i < a.train.size(); ++i) differs |= a.train[i].demo_id != c.train[i].demo_id;
    CHECK(differs);
  }
  SUBCASE("fraction outside (0, 1)") {
    CHECK_THROWS_AS(split_dataset(demos, {1.0, 0}, {}, 1), ConfigError);
    CHECK_THROWS_AS(split_dataset(demos, {0.0, 0}, {}, 1), ConfigError);
  }
}
