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

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "itorl/maze_env.hpp"
#include "itorl/rng.hpp"

namespace itorl {

struct DemoPair {
  EnvState state;
  Action action;
};

/// Expert trajectory for one task. The final pair carries the terminal
/// state (inside the goal radius) and a zero action, so `pairs.size()` is
/// the number of states and `steps()` the number of actions taken.
struct Demonstration {
  std::string demo_id;
  std::string map_id;
  Vec2 goal;
  double goal_radius = 0.5;
  std::vector<DemoPair> pairs;

  int steps() const { return static_cast<int>(pairs.size()) - 1; }
  std::vector<Vec2> positions() const;
};

/// Cell-center polyline from `start` to `goal` along the maze's depth-first
/// path. Throws PlanningError when the goal cell cannot be reached.
std::vector<Vec2> plan_path(const MazeMap& map, Vec2 start, Vec2 goal);

struct DemoOptions {
  std::string demo_id;
  double goal_radius = 0.5;
  int horizon = 50;
  ObservationConfig obs;
};

/// Walks the polyline (collinear runs merged) in equal sub-steps no longer
/// than `max_step`, truncating at the first state inside the goal radius.
/// Throws DemoTooLongError when more than `horizon` actions are needed.
Demonstration synthesize_demo(const MazeMap& map, std::span<const Vec2> path, double max_step,
                              const DemoOptions& opts);

/// Goal uniformly placed in a path cell at least `min_cells` grid cells of
/// graph distance from the start, kept `wall_margin` away from the cell edges.
Vec2 sample_goal(const MazeMap& map, Rng& rng, int min_cells = 4, double wall_margin = 0.5);

struct DemoGenConfig {
  double max_step = 0.8;
  int min_goal_cells = 4;
  int max_attempts = 1000;
  DemoOptions options;
};

/// `count` demos with goals resampled whenever the demo is too long.
std::vector<Demonstration> generate_demos(const MazeMap& map, int count, Rng rng,
                                          const DemoGenConfig& cfg);

struct OracleDecision {
  Action action;
  int target_index = -1;  // demo index steered toward; -1 when stuck
  bool used_planner = false;
  bool stuck = false;
};

/// Constructive imitator: steer toward the furthest demo state in straight
/// line of sight; when none lies ahead, plan around blocking obstacles to
/// the next free demo state, and when nothing is visible trace back to the
/// nearest demo state.
OracleDecision oracle_policy(const EnvState& state, const Demonstration& demo, const Scene& scene,
                             const TaskParams& task);

/// Re-executes the recorded actions from the first state. `max_error` is
/// the largest deviation from the recorded states and views.
struct ReplayAudit {
  Status status = Status::Running;
  double max_error = 0.0;
};
ReplayAudit replay_demo(std::shared_ptr<const MazeMap> map, const Demonstration& demo,
                        const ObservationConfig& obs, int horizon);

struct DatasetSplit {
  std::vector<Demonstration> train;
  std::vector<Demonstration> eval_new_demo;
  std::vector<Demonstration> eval_new_map;
};

struct SplitRule {
  double train_fraction = 0.9;
  /// When > 0, this many training demos per map (fewer if the map has
  /// fewer) and train_fraction is ignored.
  int train_per_map = 0;
};

DatasetSplit split_dataset(std::span<const Demonstration> demos, const SplitRule& rule,
                           const std::set<std::string>& held_out_maps, std::uint64_t seed);

}  // namespace itorl
