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

// Independent reference implementations used as oracles by the tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <span>
#include <vector>

#include "itorl/autodiff.hpp"
#include "itorl/demo_gen.hpp"
#include "itorl/maze_env.hpp"
#include "itorl/rng.hpp"

namespace itorl::testing {

inline double orient(Vec2 a, Vec2 b, Vec2 c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

inline bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) - 1e-12 <= p.x && p.x <= std::max(a.x, b.x) + 1e-12 &&
         std::min(a.y, b.y) - 1e-12 <= p.y && p.y <= std::max(a.y, b.y) + 1e-12;
}

/// Orientation-sign segment test, closed segments.
inline bool crosses(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d1 == 0 && on_segment(q1, q2, p1)) return true;
  if (d2 == 0 && on_segment(q1, q2, p2)) return true;
  if (d3 == 0 && on_segment(p1, p2, q1)) return true;
  if (d4 == 0 && on_segment(p1, p2, q2)) return true;
  return false;
}

/// All blocking segments of a scene: walls and obstacle edges.
inline std::vector<Segment> blocking_segments(const MazeMap& map, std::span<const Obstacle> obstacles) {
  std::vector<Segment> out = map.walls();
  for (const auto& o : obstacles) {
    const auto c = o.rect().corners();
    for (std::size_t i = 0; i < 4; ++i) out.push_back({c[i], c[(i + 1) % 4]});
  }
  return out;
}

/// Marches along the ray in steps of `h`; returns the first sample distance
/// whose step from the previous sample crossed a segment. Long straight
/// stretches are scanned in coarse chunks first, then refined to `h`.
inline double march_ray(std::span<const Segment> segs, Vec2 pos, double angle, double ray_len, double h = 1e-3) {
  const Vec2 dir{std::cos(angle), std::sin(angle)};
  auto hit_between = [&](double t0, double t1) {
    const Vec2 a = pos + dir * t0, b = pos + dir * t1;
    for (const auto& s : segs) {
      if (crosses(a, b, s.a, s.b)) return true;
    }
    return false;
  };
  const int chunk = 50;
  const int n = static_cast<int>(std::ceil(ray_len / h));
  for (int i = 0; i < n; i += chunk) {
    const int j = std::min(n, i + chunk);
    if (!hit_between(i * h, std::min(j * h, ray_len))) continue;
    for (int k = i; k < j; ++k) {
      if (hit_between(k * h, std::min((k + 1) * h, ray_len))) return std::min((k + 1) * h, ray_len);
    }
  }
  return ray_len;
}

/// Number of lattice cells reachable from the central cell, with adjacency
/// decided only by whether the segment between cell centers touches a wall.
inline int flood_fill_reachable(const MazeMap& map) {
  const int n = map.lattice_size();
  std::vector<char> seen(static_cast<std::size_t>(n * n), 0);
  std::queue<LatticeCell> q;
  const LatticeCell c0{n / 2, n / 2};
  q.push(c0);
  seen[static_cast<std::size_t>(c0.row * n + c0.col)] = 1;
  int count = 0;
  while (!q.empty()) {
    const auto c = q.front();
    q.pop();
    ++count;
    const LatticeCell next[4] = {{c.col + 1, c.row}, {c.col - 1, c.row}, {c.col, c.row + 1}, {c.col, c.row - 1}};
    for (const auto& m : next) {
      if (m.col < 0 || m.row < 0 || m.col >= n || m.row >= n) continue;
      auto& s = seen[static_cast<std::size_t>(m.row * n + m.col)];
      if (s) continue;
      const Vec2 a = map.cell_center(c), b = map.cell_center(m);
      bool blocked = false;
      for (const auto& w : map.walls()) {
        if (crosses(a, b, w.a, w.b)) {
          blocked = true;
          break;
        }
      }
      if (blocked) continue;
      s = 1;
      q.push(m);
    }
  }
  return count;
}

/// Brute-force arg-min of squared distance; earliest index on ties.
inline int brute_nearest(std::span<const double> q, const std::vector<std::vector<double>>& states) {
  int best = -1;
  double best_d = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    double d = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) d += (q[k] - states[i][k]) * (q[k] - states[i][k]);
    if (best < 0 || d < best_d) {
      best = static_cast<int>(i);
      best_d = d;
    }
  }
  return best;
}

/// Mean and variance of min(Binomial(n, p), cap) by exact enumeration.
inline std::pair<double, double> capped_binomial_moments(int n, double p, int cap) {
  double mean = 0.0, second = 0.0;
  for (int k = 0; k <= n; ++k) {
    double log_c = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    const double pk = std::exp(log_c + k * std::log(p) + (n - k) * std::log1p(-p));
    const double v = std::min(k, cap);
    mean += pk * v;
    second += pk * v * v;
  }
  return {mean, second - mean * mean};
}

struct GradCheck {
  int coordinates = 0;
  double max_rel_error = 0.0;
  int worst_param = -1;
  // Coordinates redrawn because x +- h crossed a relu/min branch.
  int straddled = 0;
};

/// Central differences on randomly sampled coordinates of `params`.
/// Relative error = |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradCheck finite_difference_check(std::span<ad::Parameter* const> params,
                                         const std::function<double()>& loss,
                                         const std::vector<ad::Matrix>& analytic, int samples, Rng& rng,
                                         double h = 1e-4, double floor = 1e-6) {
  std::vector<std::pair<std::size_t, Eigen::Index>> all;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Eigen::Index i = 0; i < params[p]->value.size(); ++i) all.emplace_back(p, i);
  }
  GradCheck res;
  for (int s = 0; s < samples && !all.empty(); ++s) {
    const auto [p, i] = all[rng.below(all.size())];
    double& x = params[p]->value.data()[i];
    const double saved = x;
    x = saved + h;
    const double up = loss();
    x = saved - h;
    const double down = loss();
    x = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[p].data()[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_param = static_cast<int>(p);
    }
    ++res.coordinates;
  }
  return res;
}

/// Like finite_difference_check, but `loss` also reports the tape's branch
/// signature. A coordinate whose +-h evaluations take different branches than
/// the base point straddles a kink, where central differences do not estimate
/// the derivative; it is redrawn and counted in `straddled`.
inline GradCheck finite_difference_check_smooth(std::span<ad::Parameter* const> params,
                                                const std::function<std::pair<double, std::uint64_t>()>& loss,
                                                const std::vector<ad::Matrix>& analytic, int samples, Rng& rng,
                                                double h = 1e-5, double floor = 1e-6) {
  std::vector<std::pair<std::size_t, Eigen::Index>> all;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Eigen::Index i = 0; i < params[p]->value.size(); ++i) all.emplace_back(p, i);
  }
  const std::uint64_t base = loss().second;
  GradCheck res;
  const int max_draws = 20 * samples;
  for (int draw = 0; res.coordinates < samples && draw < max_draws && !all.empty(); ++draw) {
    const auto [p, i] = all[rng.below(all.size())];
    double& x = params[p]->value.data()[i];
    const double saved = x;
    x = saved + h;
    const auto up = loss();
    x = saved - h;
    const auto down = loss();
    x = saved;
    if (up.second != base || down.second != base) {
      ++res.straddled;
      continue;
    }
    const double numeric = (up.first - down.first) / (2.0 * h);
    const double a = analytic[p].data()[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_param = static_cast<int>(p);
    }
    ++res.coordinates;
  }
  return res;
}

}  // namespace itorl::testing
