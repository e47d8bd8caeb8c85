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

#include "itorl/geometry.hpp"

#include <algorithm>
#include <limits>

namespace itorl {
namespace {

int orientation(Vec2 a, Vec2 b, Vec2 c) {
  const double v = (b - a).cross(c - a);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

}  // namespace

bool segments_intersect(const Segment& p, const Segment& q) {
  const int o1 = orientation(p.a, p.b, q.a);
  const int o2 = orientation(p.a, p.b, q.b);
  const int o3 = orientation(q.a, q.b, p.a);
  const int o4 = orientation(q.a, q.b, p.b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p.a, p.b, q.a)) return true;
  if (o2 == 0 && on_segment(p.a, p.b, q.b)) return true;
  if (o3 == 0 && on_segment(q.a, q.b, p.a)) return true;
  if (o4 == 0 && on_segment(q.a, q.b, p.b)) return true;
  return false;
}

std::optional<double> ray_segment_hit(Vec2 origin, Vec2 dir, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const Vec2 w = s.a - origin;
  const double denom = dir.cross(e);
  if (std::abs(denom) < 1e-15) {
    // Parallel. Collinear segments are hit at their nearest endpoint ahead.
    if (std::abs(w.cross(dir)) > 1e-12) return std::nullopt;
    const double ta = w.dot(dir);
    const double tb = (s.b - origin).dot(dir);
    if (ta < 0.0 && tb < 0.0) return std::nullopt;
    if (ta <= 0.0 || tb <= 0.0) return 0.0;
    return std::min(ta, tb);
  }
  const double t = w.cross(e) / denom;
  const double u = w.cross(dir) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

double point_segment_distance(Vec2 p, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const double len2 = e.squared_norm();
  if (len2 == 0.0) return distance(p, s.a);
  const double t = std::clamp((p - s.a).dot(e) / len2, 0.0, 1.0);
  return distance(p, s.a + e * t);
}

std::array<Vec2, 4> OrientedRect::corners() const {
  const Vec2 u = axis_u() * half_length;
  const Vec2 v = axis_v() * half_width;
  return {center + u + v, center - u + v, center - u - v, center + u - v};
}

std::array<Segment, 4> OrientedRect::edges() const {
  const auto c = corners();
  return {Segment{c[0], c[1]}, Segment{c[1], c[2]}, Segment{c[2], c[3]},
          Segment{c[3], c[0]}};
}

bool OrientedRect::contains(Vec2 p) const {
  const Vec2 d = p - center;
  return std::abs(d.dot(axis_u())) <= half_length && std::abs(d.dot(axis_v())) <= half_width;
}

bool OrientedRect::contains_strictly(Vec2 p) const {
  const Vec2 d = p - center;
  return std::abs(d.dot(axis_u())) < half_length && std::abs(d.dot(axis_v())) < half_width;
}

bool OrientedRect::intersects(const Segment& s) const {
  if (contains(s.a) || contains(s.b)) return true;
  for (const auto& e : edges()) {
    if (segments_intersect(e, s)) return true;
  }
  return false;
}

double OrientedRect::distance_to(Vec2 p) const {
  const Vec2 d = p - center;
  const double du = std::max(std::abs(d.dot(axis_u())) - half_length, 0.0);
  const double dv = std::max(std::abs(d.dot(axis_v())) - half_width, 0.0);
  return std::hypot(du, dv);
}

}  // namespace itorl
