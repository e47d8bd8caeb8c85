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

#include <array>
#include <cmath>
#include <optional>

namespace itorl {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  bool operator==(const Vec2&) const = default;

  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct Segment {
  Vec2 a;
  Vec2 b;
  bool operator==(const Segment&) const = default;
};

/// Closed-segment intersection test; touching and collinear overlap count.
bool segments_intersect(const Segment& p, const Segment& q);

/// Parameter t >= 0 along `dir` (unit length) where the ray first meets `s`.
std::optional<double> ray_segment_hit(Vec2 origin, Vec2 dir, const Segment& s);

double point_segment_distance(Vec2 p, const Segment& s);

/// Rectangle with center, half extents along its own axes and a rotation.
/// `half_length` runs along the heading, `half_width` across it.
struct OrientedRect {
  Vec2 center;
  double half_length = 0.0;
  double half_width = 0.0;
  double angle = 0.0;

  Vec2 axis_u() const { return {std::cos(angle), std::sin(angle)}; }
  Vec2 axis_v() const { return {-std::sin(angle), std::cos(angle)}; }
  std::array<Vec2, 4> corners() const;
  std::array<Segment, 4> edges() const;
  /// Closed containment.
  bool contains(Vec2 p) const;
  /// Strict interior containment.
  bool contains_strictly(Vec2 p) const;
  bool intersects(const Segment& s) const;
  double distance_to(Vec2 p) const;
};

}  // namespace itorl
