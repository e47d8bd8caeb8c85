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

#include "itorl/demo_gen.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <sstream>

#include "itorl/errors.hpp"

namespace itorl {

std::vector<Vec2> Demonstration::positions() const {
  std::vector<Vec2> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.state.position);
  return out;
}

namespace {

std::vector<LatticeCell> lattice_path(const MazeMap& map, LatticeCell from, LatticeCell to) {
  const int n = map.lattice_size();
  auto idx = [n](LatticeCell c) { return static_cast<std::size_t>(c.row * n + c.col); };
  std::vector<int> parent(static_cast<std::size_t>(n * n), -2);
  std::vector<LatticeCell> stack{from};
  parent[idx(from)] = -1;
  while (!stack.empty()) {
    const LatticeCell cur = stack.back();
    stack.pop_back();
    if (cur == to) break;
    for (const auto& nb : map.open_neighbors(cur)) {
      if (parent[idx(nb)] != -2) continue;
      parent[idx(nb)] = static_cast<int>(idx(cur));
      stack.push_back(nb);
    }
  }
  if (parent[idx(to)] == -2) throw PlanningError("plan_path: goal cell unreachable from start");
  std::vector<LatticeCell> cells;
  for (int i = static_cast<int>(idx(to)); i != -1; i = parent[static_cast<std::size_t>(i)]) {
    cells.push_back({i % n, i / n});
  }
  std::reverse(cells.begin(), cells.end());
  return cells;
}

std::vector<int> lattice_distances(const MazeMap& map, LatticeCell from) {
  const int n = map.lattice_size();
  auto idx = [n](LatticeCell c) { return static_cast<std::size_t>(c.row * n + c.col); };
  std::vector<int> dist(static_cast<std::size_t>(n * n), -1);
  std::queue<LatticeCell> q;
  q.push(from);
  dist[idx(from)] = 0;
  while (!q.empty()) {
    const LatticeCell cur = q.front();
    q.pop();
    for (const auto& nb : map.open_neighbors(cur)) {
      if (dist[idx(nb)] >= 0) continue;
      dist[idx(nb)] = dist[idx(cur)] + 1;
      q.push(nb);
    }
  }
  return dist;
}

bool collinear(Vec2 a, Vec2 b, Vec2 c) {
  const Vec2 u = b - a;
  const Vec2 v = c - b;
  return std::abs(u.cross(v)) <= 1e-12 * std::max(1.0, u.norm() * v.norm()) && u.dot(v) > 0.0;
}

}  // namespace

std::vector<Vec2> plan_path(const MazeMap& map, Vec2 start, Vec2 goal) {
  const auto from = map.cell_at(start);
  const auto to = map.cell_at(goal);
  if (!from || !to) throw PlanningError("plan_path: start or goal outside the maze lattice");
  if (start == goal) return {start};
  const auto cells = lattice_path(map, *from, *to);
  std::vector<Vec2> out{start};
  for (std::size_t i = 1; i + 1 < cells.size(); ++i) out.push_back(map.cell_center(cells[i]));
  out.push_back(goal);
  return out;
}

Demonstration synthesize_demo(const MazeMap& map, std::span<const Vec2> path, double max_step,
                              const DemoOptions& opts) {
  if (path.empty()) throw InputError("synthesize_demo: empty path");
  if (!(max_step > 0.0) || max_step > 1.0) {
    throw ConfigError("synthesize_demo: max_step must lie in (0, 1]");
  }
  std::vector<Vec2> knots{path.front()};
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (path[i] == knots.back()) continue;
    if (knots.size() >= 2 && collinear(knots[knots.size() - 2], knots.back(), path[i])) {
      knots.back() = path[i];
    } else {
      knots.push_back(path[i]);
    }
  }

  const Vec2 goal = path.back();
  std::vector<Action> actions;
  std::vector<Vec2> positions{knots.front()};
  bool reached = distance(positions.back(), goal) <= opts.goal_radius;
  for (std::size_t i = 1; i < knots.size() && !reached; ++i) {
    const Vec2 from = knots[i - 1];
    const Vec2 to = knots[i];
    const int n = std::max(1, static_cast<int>(std::ceil(distance(from, to) / max_step - 1e-12)));
    for (int k = 1; k <= n && !reached; ++k) {
      const Vec2 target = from + (to - from) * (static_cast<double>(k) / n);
      const Action a{target.x - positions.back().x, target.y - positions.back().y};
      actions.push_back(a);
      positions.push_back(positions.back() + Vec2{a.dx, a.dy});
      reached = distance(positions.back(), goal) <= opts.goal_radius;
    }
  }
  if (!reached) throw PlanningError("synthesize_demo: path does not end inside the goal radius");
  if (static_cast<int>(actions.size()) > opts.horizon) {
    std::ostringstream msg;
    msg << "synthesize_demo: " << actions.size() << " steps exceed horizon " << opts.horizon;
    throw DemoTooLongError(msg.str());
  }

  Demonstration demo;
  demo.demo_id = opts.demo_id;
  demo.map_id = map.map_id();
  demo.goal = goal;
  demo.goal_radius = opts.goal_radius;
  demo.pairs.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    DemoPair pair;
    pair.state.position = positions[i];
    pair.state.local_view = ray_cast(map, {}, positions[i], opts.obs.n_rays, opts.obs.ray_len);
    pair.state.t = static_cast<int>(i);
    pair.action = i < actions.size() ? actions[i] : Action{};
    demo.pairs.push_back(std::move(pair));
  }
  return demo;
}

Vec2 sample_goal(const MazeMap& map, Rng& rng, int min_cells, double wall_margin) {
  const auto start_cell = map.cell_at(map.start());
  if (!start_cell) throw ConfigError("sample_goal: map start outside the lattice");
  const auto dist = lattice_distances(map, *start_cell);
  const int n = map.lattice_size();
  std::vector<LatticeCell> candidates;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const int d = dist[static_cast<std::size_t>(r * n + c)];
      if (d >= 0 && d * map.path_width() >= min_cells) candidates.push_back({c, r});
    }
  }
  if (candidates.empty()) throw ConfigError("sample_goal: no path cell far enough from the start");
  const LatticeCell cell = candidates[rng.below(candidates.size())];
  const double spread = std::max(0.0, 0.5 * map.path_width() - wall_margin);
  const Vec2 jitter{rng.uniform(-spread, spread), rng.uniform(-spread, spread)};
  return map.cell_center(cell) + jitter;
}

std::vector<Demonstration> generate_demos(const MazeMap& map, int count, Rng rng,
                                          const DemoGenConfig& cfg) {
  std::vector<Demonstration> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > cfg.max_attempts) {
      throw PlanningError("generate_demos: too many rejected goals for map " + map.map_id());
    }
    const Vec2 goal = sample_goal(map, rng, cfg.min_goal_cells);
    DemoOptions opts = cfg.options;
    std::ostringstream id;
    id << map.map_id() << "-d" << std::setw(4) << std::setfill('0') << out.size();
    opts.demo_id = id.str();
    try {
      const auto path = plan_path(map, map.start(), goal);
      out.push_back(synthesize_demo(map, path, cfg.max_step, opts));
    } catch (const DemoTooLongError&) {
      continue;
    }
  }
  return out;
}

namespace {

constexpr double kPlannerResolution = 0.1;
// Above half the cell diagonal, so a move between two free neighbouring
// cells can never cross a zero-thickness wall.
constexpr double kPlannerClearance = 0.075;

Action step_toward(Vec2 from, Vec2 to) {
  Vec2 d = to - from;
  const double m = std::max(std::abs(d.x), std::abs(d.y));
  if (m > 1.0) d = d * (1.0 / m);
  return {std::clamp(d.x, -1.0, 1.0), std::clamp(d.y, -1.0, 1.0)};
}

/// Line of sight that also keeps clear of wall ends and obstacle corners, so
/// sub-steps along it cannot land exactly on a vertex the full line grazed.
bool clear_line(const Scene& scene, const Segment& s) {
  constexpr double kVertexClearance = 1e-6;
  if (scene.segment_blocked(s)) return false;
  for (const auto& w : scene.map->walls()) {
    if (point_segment_distance(w.a, s) < kVertexClearance || point_segment_distance(w.b, s) < kVertexClearance) {
      return false;
    }
  }
  for (const auto& o : scene.obstacles) {
    for (const auto& c : o.rect().corners()) {
      if (point_segment_distance(c, s) < kVertexClearance) return false;
    }
  }
  return true;
}

/// Occupancy grid over the maze lattice with shortest 8-connected path
/// costs from a single source.
class GridPlanner {
 public:
  GridPlanner(const Scene& scene, Vec2 from) {
    h_ = kPlannerResolution;
    x0_ = scene.map->margin();
    const double extent = scene.map->lattice_size() * scene.map->path_width();
    n_ = std::max(1, static_cast<int>(std::ceil(extent / h_ - 1e-9)));
    free_.assign(static_cast<std::size_t>(n_ * n_), 1);
    for (const auto& w : scene.map->walls()) {
      block_box(std::min(w.a.x, w.b.x), std::max(w.a.x, w.b.x), std::min(w.a.y, w.b.y), std::max(w.a.y, w.b.y),
                [&](Vec2 c) { return point_segment_distance(c, w); });
    }
    for (const auto& o : scene.obstacles) {
      const auto r = o.rect();
      double lx = 1e300, hx = -1e300, ly = 1e300, hy = -1e300;
      for (const auto& c : r.corners()) {
        lx = std::min(lx, c.x), hx = std::max(hx, c.x), ly = std::min(ly, c.y), hy = std::max(hy, c.y);
      }
      block_box(lx, hx, ly, hy, [&](Vec2 c) { return r.distance_to(c); });
    }
    src_ = index_of(from);
    free_[static_cast<std::size_t>(src_)] = 1;
    search();
  }

  bool reached(Vec2 p) const {
    const int i = index_of(p);
    return i >= 0 && std::isfinite(cost_[static_cast<std::size_t>(i)]);
  }

  /// Waypoints from the source to `p`; requires reached(p).
  std::vector<Vec2> path_to(Vec2 from, Vec2 p) const {
    std::vector<Vec2> path;
    for (int v = index_of(p); v != -1; v = parent_[static_cast<std::size_t>(v)]) path.push_back(centre(v));
    std::reverse(path.begin(), path.end());
    path.front() = from;
    path.back() = p;
    return path;
  }

 private:
  Vec2 centre(int v) const { return {x0_ + (v % n_ + 0.5) * h_, x0_ + (v / n_ + 0.5) * h_}; }

  int index_of(Vec2 p) const {
    const int i = static_cast<int>(std::floor((p.x - x0_) / h_));
    const int j = static_cast<int>(std::floor((p.y - x0_) / h_));
    if (i < 0 || j < 0 || i >= n_ || j >= n_) return -1;
    return j * n_ + i;
  }

  template <typename Dist>
  void block_box(double lx, double hx, double ly, double hy, Dist dist) {
    const double c = kPlannerClearance;
    const int i0 = std::max(0, static_cast<int>(std::floor((lx - c - x0_) / h_)));
    const int i1 = std::min(n_ - 1, static_cast<int>(std::floor((hx + c - x0_) / h_)));
    const int j0 = std::max(0, static_cast<int>(std::floor((ly - c - x0_) / h_)));
    const int j1 = std::min(n_ - 1, static_cast<int>(std::floor((hy + c - x0_) / h_)));
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        if (dist(centre(j * n_ + i)) < c) free_[static_cast<std::size_t>(j * n_ + i)] = 0;
      }
    }
  }

  void search() {
    cost_.assign(free_.size(), std::numeric_limits<double>::infinity());
    parent_.assign(free_.size(), -1);
    if (src_ < 0) return;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    cost_[static_cast<std::size_t>(src_)] = 0.0;
    open.push({0.0, src_});
    while (!open.empty()) {
      const auto [c, u] = open.top();
      open.pop();
      if (c > cost_[static_cast<std::size_t>(u)]) continue;
      const int ui = u % n_;
      const int uj = u / n_;
      for (int dj = -1; dj <= 1; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0) continue;
          const int vi = ui + di;
          const int vj = uj + dj;
          if (vi < 0 || vj < 0 || vi >= n_ || vj >= n_) continue;
          const int v = vj * n_ + vi;
          if (!free_[static_cast<std::size_t>(v)]) continue;
          // Diagonal moves must not squeeze between two blocked cells.
          if (di != 0 && dj != 0 &&
              (!free_[static_cast<std::size_t>(uj * n_ + vi)] || !free_[static_cast<std::size_t>(vj * n_ + ui)])) {
            continue;
          }
          const double nc = c + ((di != 0 && dj != 0) ? std::numbers::sqrt2 : 1.0);
          if (nc < cost_[static_cast<std::size_t>(v)]) {
            cost_[static_cast<std::size_t>(v)] = nc;
            parent_[static_cast<std::size_t>(v)] = u;
            open.push({nc, v});
          }
        }
      }
    }
  }

  double h_ = 0.0;
  double x0_ = 0.0;
  int n_ = 0;
  int src_ = -1;
  std::vector<char> free_;
  std::vector<double> cost_;
  std::vector<int> parent_;
};

/// One step along a planned path toward its furthest waypoint in sight.
std::optional<Action> follow(const Scene& scene, Vec2 p, const std::vector<Vec2>& path) {
  for (std::size_t k = path.size(); k-- > 1;) {
    if (clear_line(scene, {p, path[k]})) return step_toward(p, path[k]);
  }
  return std::nullopt;
}

}  // namespace

OracleDecision oracle_policy(const EnvState& state, const Demonstration& demo, const Scene& scene,
                             const TaskParams& task) {
  if (demo.pairs.empty()) throw InputError("oracle_policy: empty demonstration");
  const Vec2 p = state.position;
  OracleDecision out;
  const int last = static_cast<int>(demo.pairs.size()) - 1;
  if (distance(p, task.goal) <= task.goal_radius) {
    out.target_index = last;
    return out;
  }
  const auto pos = demo.positions();

  int visible = -1;
  for (int j = last; j >= 0; --j) {
    if (clear_line(scene, {p, pos[static_cast<std::size_t>(j)]})) {
      visible = j;
      break;
    }
  }
  auto go_straight = [&](int j) {
    out.action = step_toward(p, pos[static_cast<std::size_t>(j)]);
    out.target_index = j;
    return out;
  };
  const bool moves = visible >= 0 && distance(p, pos[static_cast<std::size_t>(visible)]) > 1e-9;
  if (scene.obstacles.empty() && moves) return go_straight(visible);

  // Furthest demo state reachable at all; when it lies beyond the line of
  // sight, walk the shortest detour toward it. Earlier states count too,
  // which covers tracing back along the demo.
  const GridPlanner planner(scene, p);
  int reachable = -1;
  for (int k = last; k >= 0; --k) {
    const Vec2 g = pos[static_cast<std::size_t>(k)];
    if (scene.free(g) && planner.reached(g)) {
      reachable = k;
      break;
    }
  }
  if (reachable > visible && distance(p, pos[static_cast<std::size_t>(reachable)]) > 1e-9) {
    if (auto a = follow(scene, p, planner.path_to(p, pos[static_cast<std::size_t>(reachable)]))) {
      out.action = *a;
      out.target_index = reachable;
      out.used_planner = true;
      return out;
    }
  }
  if (moves) return go_straight(visible);
  out.stuck = true;
  out.target_index = -1;
  return out;
}

ReplayAudit replay_demo(std::shared_ptr<const MazeMap> map, const Demonstration& demo,
                        const ObservationConfig& obs, int horizon) {
  ReplayAudit r;
  if (demo.pairs.empty()) return r;
  TaskParams task;
  task.map = std::move(map);
  task.goal = demo.goal;
  task.goal_radius = demo.goal_radius;
  task.horizon = horizon;
  EnvState s = reset_at(task, {}, obs, demo.pairs.front().state.position);
  for (int k = 0; k < demo.steps(); ++k) {
    const auto out = step(s, demo.pairs[static_cast<std::size_t>(k)].action, task, {}, obs, 1.0);
    s = out.next_state;
    const auto& ref = demo.pairs[static_cast<std::size_t>(k + 1)].state;
    r.max_error = std::max(r.max_error, distance(s.position, ref.position));
    for (std::size_t i = 0; i < s.local_view.size() && i < ref.local_view.size(); ++i) {
      r.max_error = std::max(r.max_error, std::abs(s.local_view[i] - ref.local_view[i]));
    }
    r.status = out.status;
    if (out.status != Status::Running) break;
  }
  return r;
}

DatasetSplit split_dataset(std::span<const Demonstration> demos, const SplitRule& rule,
                           const std::set<std::string>& held_out_maps, std::uint64_t seed) {
  if (!(rule.train_fraction > 0.0 && rule.train_fraction < 1.0)) {
    throw ConfigError("split_dataset: train_fraction must lie in (0, 1)");
  }
  std::map<std::string, std::vector<std::size_t>> by_map;
  for (std::size_t i = 0; i < demos.size(); ++i) by_map[demos[i].map_id].push_back(i);
  DatasetSplit split;
  const Rng root(seed);
  for (auto& [map_id, idx] : by_map) {
    if (held_out_maps.count(map_id) != 0) {
      for (auto i : idx) split.eval_new_map.push_back(demos[i]);
      continue;
    }
    Rng rng = root.split(map_id);
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    // The epsilon absorbs representation error such as 0.29 * 100 < 29.
    auto n_train = static_cast<std::size_t>(std::floor(rule.train_fraction * idx.size() + 1e-9));
    if (rule.train_per_map > 0) n_train = std::min(idx.size(), static_cast<std::size_t>(rule.train_per_map));
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      (k < n_train ? split.train : split.eval_new_demo).push_back(demos[idx[k]]);
    }
  }
  return split;
}

}  // namespace itorl
