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
#include <span>
#include <string>
#include <vector>

#include "itorl/geometry.hpp"
#include "itorl/rng.hpp"

namespace itorl {

struct LatticeCell {
  int col = 0;
  int row = 0;
  bool operator==(const LatticeCell&) const = default;
};

/// One maze: zero-thickness wall segments around a square lattice of
/// path cells. The lattice has `grid_size / path_width - 1` cells per side,
/// each `path_width` wide, inset by half a path width so that the map
/// center falls in the middle of the central cell.
class MazeMap {
 public:
  MazeMap(std::string map_id, std::uint64_t seed, int grid_size, int path_width,
          std::vector<Segment> walls, Vec2 start);

  const std::string& map_id() const { return map_id_; }
  std::uint64_t seed() const { return seed_; }
  int grid_size() const { return grid_size_; }
  int path_width() const { return path_width_; }
  const std::vector<Segment>& walls() const { return walls_; }
  Vec2 start() const { return start_; }

  int lattice_size() const { return lattice_; }
  double margin() const { return 0.5 * path_width_; }
  Vec2 cell_center(LatticeCell c) const;
  std::optional<LatticeCell> cell_at(Vec2 p) const;
  bool in_lattice(LatticeCell c) const {
    return c.col >= 0 && c.row >= 0 && c.col < lattice_ && c.row < lattice_;
  }
  /// Both cells adjacent and no wall on their shared edge.
  bool passage_open(LatticeCell a, LatticeCell b) const;
  std::vector<LatticeCell> open_neighbors(LatticeCell c) const;
  /// Strictly inside the lattice's outer boundary.
  bool inside_bounds(Vec2 p) const;
  bool on_wall(Vec2 p, double tol = 1e-12) const;
  /// Number of wall segments that lie strictly inside the outer boundary.
  int interior_wall_count() const;

 private:
  bool edge_has_wall(Segment edge) const;

  std::string map_id_;
  std::uint64_t seed_;
  int grid_size_;
  int path_width_;
  std::vector<Segment> walls_;
  Vec2 start_;
  int lattice_;
  std::vector<char> open_east_;
  std::vector<char> open_north_;
};

/// Randomized depth-first carve. Requires grid_size divisible by
/// 2 * path_width and path_width >= 1.
MazeMap generate_maze(std::uint64_t seed, int grid_size, int path_width);

struct Obstacle {
  Vec2 center;
  double length = 1.2;
  double width = 1.35;
  double orientation = 0.0;

  OrientedRect rect() const { return {center, 0.5 * length, 0.5 * width, orientation}; }
};

struct TaskParams {
  std::shared_ptr<const MazeMap> map;
  Vec2 goal;
  double goal_radius = 0.5;
  int horizon = 50;
  double obstacle_prob = 0.1;
  int max_obstacles = 4;
};

struct ObservationConfig {
  int n_rays = 8;
  double ray_len = 5.0;
  bool include_position = true;

  int dim() const { return n_rays + (include_position ? 2 : 0); }
};

struct EnvState {
  Vec2 position;
  std::vector<double> local_view;
  int t = 0;
};

/// Flattened observation: optional (x, y) followed by the ray distances.
std::vector<double> observation(const EnvState& s, bool include_position);

struct Action {
  double dx = 0.0;
  double dy = 0.0;
  bool operator==(const Action&) const = default;
};

enum class Status { Running, Success, Dead, Timeout };
const char* to_string(Status s);

struct StepOutcome {
  EnvState next_state;
  double ending_reward = 0.0;
  Status status = Status::Running;
};

/// Walls plus the obstacles of one episode.
struct Scene {
  const MazeMap* map = nullptr;
  std::span<const Obstacle> obstacles;

  bool segment_blocked(const Segment& s) const;
  bool point_in_geometry(Vec2 p) const;
  /// Inside the lattice bounds and clear of walls and obstacles.
  bool free(Vec2 p) const;
};

std::vector<double> ray_cast(const MazeMap& map, std::span<const Obstacle> obstacles, Vec2 pos,
                             int n_rays, double ray_len);

struct Demonstration;

/// Obstacles straddling the demo path; step k may spawn one centered on
/// the state reached by action k. Steps whose rectangle would contain the
/// episode start or the goal draw but never spawn.
std::vector<Obstacle> spawn_obstacles(const MazeMap& map, const Demonstration& demo, Rng rng,
                                      double p, int max_n);

/// Number of demo steps that are allowed to spawn an obstacle.
int eligible_obstacle_steps(const MazeMap& map, const Demonstration& demo);

EnvState reset_for_evaluation(const TaskParams& task, std::span<const Obstacle> obstacles,
                              const ObservationConfig& obs);

struct ResetOptions {
  double disturbance = 0.1;
  int max_retries = 16;
};

/// Uniform demo state plus Gaussian disturbance, resampled until free.
EnvState reset_for_training(const TaskParams& task, const Demonstration& demo,
                            std::span<const Obstacle> obstacles, const ObservationConfig& obs,
                            Rng& start_index_rng, Rng& disturbance_rng, const ResetOptions& opts);

/// Reset from an explicit position (offset tests, custom starts).
EnvState reset_at(const TaskParams& task, std::span<const Obstacle> obstacles,
                  const ObservationConfig& obs, Vec2 position);

StepOutcome step(const EnvState& state, Action action, const TaskParams& task,
                 std::span<const Obstacle> obstacles, const ObservationConfig& obs,
                 double ending_reward_magnitude = 1.0);

}  // namespace itorl
