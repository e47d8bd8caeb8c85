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

#include "itorl/maze_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "itorl/demo_gen.hpp"
#include "itorl/errors.hpp"

namespace itorl {
namespace {

bool collinear_overlap(const Segment& edge, const Segment& wall) {
  const Vec2 d = edge.b - edge.a;
  const double len = d.norm();
  if (len == 0.0) return false;
  const Vec2 u = d * (1.0 / len);
  const double tol = 1e-9;
  if (std::abs(u.cross(wall.a - edge.a)) > tol || std::abs(u.cross(wall.b - edge.a)) > tol) {
    return false;
  }
  const double ta = u.dot(wall.a - edge.a);
  const double tb = u.dot(wall.b - edge.a);
  const double lo = std::max(std::min(ta, tb), 0.0);
  const double hi = std::min(std::max(ta, tb), len);
  return hi - lo > tol;
}

}  // namespace

MazeMap::MazeMap(std::string map_id, std::uint64_t seed, int grid_size, int path_width,
                 std::vector<Segment> walls, Vec2 start)
    : map_id_(std::move(map_id)),
      seed_(seed),
      grid_size_(grid_size),
      path_width_(path_width),
      walls_(std::move(walls)),
      start_(start) {
  if (path_width_ < 1 || grid_size_ < 2 * path_width_) {
    throw ConfigError("maze dimensions: need path_width >= 1 and grid_size >= 2*path_width");
  }
  lattice_ = grid_size_ / path_width_ - 1;
  open_east_.assign(static_cast<std::size_t>(lattice_ * lattice_), 0);
  open_north_.assign(static_cast<std::size_t>(lattice_ * lattice_), 0);
  const double w = path_width_;
  for (int r = 0; r < lattice_; ++r) {
    for (int c = 0; c < lattice_; ++c) {
      const double x0 = margin() + c * w;
      const double y0 = margin() + r * w;
      const std::size_t idx = static_cast<std::size_t>(r * lattice_ + c);
      if (c + 1 < lattice_) {
        open_east_[idx] = !edge_has_wall({{x0 + w, y0}, {x0 + w, y0 + w}});
      }
      if (r + 1 < lattice_) {
        open_north_[idx] = !edge_has_wall({{x0, y0 + w}, {x0 + w, y0 + w}});
      }
    }
  }
}

bool MazeMap::edge_has_wall(Segment edge) const {
  return std::any_of(walls_.begin(), walls_.end(),
                     [&](const Segment& w) { return collinear_overlap(edge, w); });
}

Vec2 MazeMap::cell_center(LatticeCell c) const {
  const double w = path_width_;
  return {margin() + (c.col + 0.5) * w, margin() + (c.row + 0.5) * w};
}

std::optional<LatticeCell> MazeMap::cell_at(Vec2 p) const {
  const double w = path_width_;
  const int c = static_cast<int>(std::floor((p.x - margin()) / w));
  const int r = static_cast<int>(std::floor((p.y - margin()) / w));
  LatticeCell cell{c, r};
  if (!in_lattice(cell)) return std::nullopt;
  return cell;
}

bool MazeMap::passage_open(LatticeCell a, LatticeCell b) const {
  if (!in_lattice(a) || !in_lattice(b)) return false;
  if (a.row == b.row && std::abs(a.col - b.col) == 1) {
    const int c = std::min(a.col, b.col);
    return open_east_[static_cast<std::size_t>(a.row * lattice_ + c)] != 0;
  }
  if (a.col == b.col && std::abs(a.row - b.row) == 1) {
    const int r = std::min(a.row, b.row);
    return open_north_[static_cast<std::size_t>(r * lattice_ + a.col)] != 0;
  }
  return false;
}

std::vector<LatticeCell> MazeMap::open_neighbors(LatticeCell c) const {
  std::vector<LatticeCell> out;
  const LatticeCell cand[4] = {
      {c.col + 1, c.row}, {c.col, c.row + 1}, {c.col - 1, c.row}, {c.col, c.row - 1}};
  for (const auto& n : cand) {
    if (passage_open(c, n)) out.push_back(n);
  }
  return out;
}

bool MazeMap::inside_bounds(Vec2 p) const {
  const double lo = margin();
  const double hi = margin() + lattice_ * static_cast<double>(path_width_);
  return p.x > lo && p.x < hi && p.y > lo && p.y < hi;
}

bool MazeMap::on_wall(Vec2 p, double tol) const {
  return std::any_of(walls_.begin(), walls_.end(),
                     [&](const Segment& w) { return point_segment_distance(p, w) <= tol; });
}

int MazeMap::interior_wall_count() const {
  const double lo = margin();
  const double hi = margin() + lattice_ * static_cast<double>(path_width_);
  auto on_boundary = [&](const Segment& s) {
    auto same = [](double a, double b) { return std::abs(a - b) < 1e-9; };
    return (same(s.a.x, lo) && same(s.b.x, lo)) || (same(s.a.x, hi) && same(s.b.x, hi)) ||
           (same(s.a.y, lo) && same(s.b.y, lo)) || (same(s.a.y, hi) && same(s.b.y, hi));
  };
  return static_cast<int>(
      std::count_if(walls_.begin(), walls_.end(), [&](const Segment& s) { return !on_boundary(s); }));
}

MazeMap generate_maze(std::uint64_t seed, int grid_size, int path_width) {
  if (path_width < 1 || grid_size < 2 * path_width || grid_size % (2 * path_width) != 0) {
    std::ostringstream msg;
    msg << "generate_maze: grid_size " << grid_size << " must be a positive multiple of 2*path_width ("
        << 2 * path_width << ")";
    throw ConfigError(msg.str());
  }
  const int n = grid_size / path_width - 1;
  const double w = path_width;
  const double m = 0.5 * w;
  std::vector<char> visited(static_cast<std::size_t>(n * n), 0);
  std::vector<char> east(static_cast<std::size_t>(n * n), 0);
  std::vector<char> north(static_cast<std::size_t>(n * n), 0);
  auto idx = [n](int c, int r) { return static_cast<std::size_t>(r * n + c); };

  Rng rng = Rng(seed).split("maze");
  const int centre = n / 2;
  std::vector<LatticeCell> stack{{centre, centre}};
  visited[idx(centre, centre)] = 1;
  while (!stack.empty()) {
    const LatticeCell cur = stack.back();
    LatticeCell options[4];
    int count = 0;
    const LatticeCell cand[4] = {{cur.col + 1, cur.row},
                                 {cur.col, cur.row + 1},
                                 {cur.col - 1, cur.row},
                                 {cur.col, cur.row - 1}};
    for (const auto& c : cand) {
      if (c.col >= 0 && c.row >= 0 && c.col < n && c.row < n && !visited[idx(c.col, c.row)]) {
        options[count++] = c;
      }
    }
    if (count == 0) {
      stack.pop_back();
      continue;
    }
    const LatticeCell next = options[rng.below(static_cast<std::uint64_t>(count))];
    if (next.row == cur.row) {
      east[idx(std::min(cur.col, next.col), cur.row)] = 1;
    } else {
      north[idx(cur.col, std::min(cur.row, next.row))] = 1;
    }
    visited[idx(next.col, next.row)] = 1;
    stack.push_back(next);
  }

  std::vector<Segment> walls;
  for (int k = 0; k < n; ++k) {
    const double a = m + k * w;
    walls.push_back({{a, m}, {a + w, m}});    // south boundary
    walls.push_back({{m, a}, {m, a + w}});    // west boundary
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double x0 = m + c * w;
      const double y0 = m + r * w;
      if (c + 1 == n || !east[idx(c, r)]) walls.push_back({{x0 + w, y0}, {x0 + w, y0 + w}});
      if (r + 1 == n || !north[idx(c, r)]) walls.push_back({{x0, y0 + w}, {x0 + w, y0 + w}});
    }
  }
  std::ostringstream id;
  id << "maze-g" << grid_size << "-w" << path_width << "-s" << seed;
  const double half = 0.5 * grid_size;
  return MazeMap(id.str(), seed, grid_size, path_width, std::move(walls), {half, half});
}

std::vector<double> observation(const EnvState& s, bool include_position) {
  std::vector<double> out;
  out.reserve(s.local_view.size() + 2);
  if (include_position) {
    out.push_back(s.position.x);
    out.push_back(s.position.y);
  }
  out.insert(out.end(), s.local_view.begin(), s.local_view.end());
  return out;
}

const char* to_string(Status s) {
  switch (s) {
    case Status::Running:
      return "running";
    case Status::Success:
      return "success";
    case Status::Dead:
      return "dead";
    case Status::Timeout:
      return "timeout";
  }
  return "unknown";
}

bool Scene::segment_blocked(const Segment& s) const {
  for (const auto& w : map->walls()) {
    if (segments_intersect(s, w)) return true;
  }
  for (const auto& o : obstacles) {
    if (o.rect().intersects(s)) return true;
  }
  return false;
}

bool Scene::point_in_geometry(Vec2 p) const {
  if (map->on_wall(p)) return true;
  return std::any_of(obstacles.begin(), obstacles.end(),
                     [&](const Obstacle& o) { return o.rect().contains(p); });
}

bool Scene::free(Vec2 p) const { return map->inside_bounds(p) && !point_in_geometry(p); }

std::vector<double> ray_cast(const MazeMap& map, std::span<const Obstacle> obstacles, Vec2 pos,
                             int n_rays, double ray_len) {
  const Scene scene{&map, obstacles};
  if (scene.point_in_geometry(pos)) {
    throw PreconditionError("ray_cast: position lies inside walls or obstacles");
  }
  std::vector<double> out(static_cast<std::size_t>(n_rays), ray_len);
  for (int k = 0; k < n_rays; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / n_rays;
    const Vec2 dir{std::cos(theta), std::sin(theta)};
    double best = ray_len;
    for (const auto& w : map.walls()) {
      if (auto t = ray_segment_hit(pos, dir, w); t && *t < best) best = *t;
    }
    for (const auto& o : obstacles) {
      for (const auto& e : o.rect().edges()) {
        if (auto t = ray_segment_hit(pos, dir, e); t && *t < best) best = *t;
      }
    }
    out[static_cast<std::size_t>(k)] = best;
  }
  return out;
}

namespace {

// Eligibility uses the largest obstacle so it does not depend on the draw.
bool step_can_spawn(const MazeMap& map, const Demonstration& demo, int k) {
  const auto& a = demo.pairs[static_cast<std::size_t>(k)].action;
  Obstacle o;
  o.center = demo.pairs[static_cast<std::size_t>(k + 1)].state.position;
  o.orientation = std::atan2(a.dy, a.dx);
  o.length = 1.3;
  return !o.rect().contains(map.start()) && !o.rect().contains(demo.goal);
}

}  // namespace

int eligible_obstacle_steps(const MazeMap& map, const Demonstration& demo) {
  int eligible = 0;
  for (int k = 0; k < demo.steps(); ++k) eligible += step_can_spawn(map, demo, k) ? 1 : 0;
  return eligible;
}

std::vector<Obstacle> spawn_obstacles(const MazeMap& map, const Demonstration& demo, Rng rng,
                                      double p, int max_n) {
  std::vector<Obstacle> out;
  for (int k = 0; k < demo.steps(); ++k) {
    const double trigger = rng.uniform();
    const double length = rng.uniform(1.1, 1.3);
    if (static_cast<int>(out.size()) >= max_n || trigger >= p) continue;
    if (!step_can_spawn(map, demo, k)) continue;
    const auto& a = demo.pairs[static_cast<std::size_t>(k)].action;
    Obstacle o;
    o.center = demo.pairs[static_cast<std::size_t>(k + 1)].state.position;
    o.length = length;
    o.width = 1.35;
    o.orientation = std::atan2(a.dy, a.dx);
    out.push_back(o);
  }
  return out;
}

EnvState reset_at(const TaskParams& task, std::span<const Obstacle> obstacles,
                  const ObservationConfig& obs, Vec2 position) {
  EnvState s;
  s.position = position;
  s.local_view = ray_cast(*task.map, obstacles, position, obs.n_rays, obs.ray_len);
  s.t = 0;
  return s;
}

EnvState reset_for_evaluation(const TaskParams& task, std::span<const Obstacle> obstacles,
                              const ObservationConfig& obs) {
  return reset_at(task, obstacles, obs, task.map->start());
}

EnvState reset_for_training(const TaskParams& task, const Demonstration& demo,
                            std::span<const Obstacle> obstacles, const ObservationConfig& obs,
                            Rng& start_index_rng, Rng& disturbance_rng, const ResetOptions& opts) {
  if (demo.pairs.empty()) throw InputError("reset: empty demonstration");
  const Scene scene{task.map.get(), obstacles};
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < demo.pairs.size(); ++i) {
    if (scene.free(demo.pairs[i].state.position)) candidates.push_back(i);
  }
  if (candidates.empty()) return reset_for_evaluation(task, obstacles, obs);
  const Vec2 anchor = demo.pairs[candidates[start_index_rng.below(candidates.size())]].state.position;
  for (int attempt = 0; attempt < opts.max_retries; ++attempt) {
    const Vec2 noise{disturbance_rng.normal(), disturbance_rng.normal()};
    const Vec2 p = anchor + noise * opts.disturbance;
    if (scene.free(p) && !scene.segment_blocked({anchor, p})) return reset_at(task, obstacles, obs, p);
  }
  return reset_at(task, obstacles, obs, anchor);
}

StepOutcome step(const EnvState& state, Action action, const TaskParams& task,
                 std::span<const Obstacle> obstacles, const ObservationConfig& obs,
                 double ending_reward_magnitude) {
  if (!std::isfinite(action.dx) || !std::isfinite(action.dy) || std::abs(action.dx) > 1.0 ||
      std::abs(action.dy) > 1.0) {
    throw InputError("step: action outside [-1, 1]^2");
  }
  const Scene scene{task.map.get(), obstacles};
  const Vec2 target = state.position + Vec2{action.dx, action.dy};
  StepOutcome out;
  if (scene.segment_blocked({state.position, target})) {
    // The agent stops where it was; the episode is over.
    out.next_state = state;
    out.next_state.t = state.t + 1;
    out.status = Status::Dead;
    out.ending_reward = -ending_reward_magnitude;
    return out;
  }
  out.next_state.position = target;
  out.next_state.t = state.t + 1;
  out.next_state.local_view = ray_cast(*task.map, obstacles, target, obs.n_rays, obs.ray_len);
  if (distance(target, task.goal) <= task.goal_radius) {
    out.status = Status::Success;
    out.ending_reward = ending_reward_magnitude;
  } else if (out.next_state.t >= task.horizon) {
    out.status = Status::Timeout;
  }
  return out;
}

}  // namespace itorl
