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
#include <vector>

#include "itorl/geometry.hpp"
#include "itorl/rng.hpp"

using namespace itorl;

namespace {

// Parametric oracle for segments in general position.
bool parametric_cross(const Segment& p, const Segment& q) {
  const double a = p.b.x - p.a.x, b = -(q.b.x - q.a.x);
  const double c = p.b.y - p.a.y, d = -(q.b.y - q.a.y);
  const double det = a * d - b * c;
  if (det == 0.0) return false;
  const double rx = q.a.x - p.a.x, ry = q.a.y - p.a.y;
  const double s = (rx * d - b * ry) / det;
  const double t = (a * ry - rx * c) / det;
  return s >= 0.0 && s <= 1.0 && t >= 0.0 && t <= 1.0;
}

Vec2 random_point(Rng& rng, double lo, double hi) { return {rng.uniform(lo, hi), rng.uniform(lo, hi)}; }

}  // namespace

TEST_CASE("segments_intersect matches a parametric solve") {
  Rng rng(17);
  int agree = 0;
  for (int i = 0; i < 20000; ++i) {
    const Segment p{random_point(rng, 0, 10), random_point(rng, 0, 10)};
    const Segment q{random_point(rng, 0, 10), random_point(rng, 0, 10)};
    agree += segments_intersect(p, q) == parametric_cross(p, q);
  }
  CHECK(agree == 20000);
}

TEST_CASE("segments_intersect degenerate contacts") {
  CHECK(segments_intersect({{0, 0}, {2, 0}}, {{1, 0}, {1, 3}}));  // T junction
  CHECK(segments_intersect({{0, 0}, {2, 0}}, {{2, 0}, {3, 1}}));  // shared endpoint
  CHECK(segments_intersect({{0, 0}, {2, 0}}, {{1, 0}, {3, 0}}));  // collinear overlap
  CHECK_FALSE(segments_intersect({{0, 0}, {1, 0}}, {{2, 0}, {3, 0}}));
  CHECK_FALSE(segments_intersect({{0, 0}, {1, 1}}, {{0, 1}, {0.4, 0.6000001}}));
}

TEST_CASE("ray_segment_hit") {
  const Segment wall{{3, -1}, {3, 1}};
  CHECK(*ray_segment_hit({0, 0}, {1, 0}, wall) == doctest::Approx(3.0));
  CHECK_FALSE(ray_segment_hit({0, 0}, {-1, 0}, wall).has_value());
  CHECK_FALSE(ray_segment_hit({0, 0}, {0, 1}, wall).has_value());
  const double s = std::numbers::sqrt2 / 2;
  CHECK(*ray_segment_hit({0, 0}, {s, s}, {{1, -5}, {1, 5}}) == doctest::Approx(std::numbers::sqrt2));
  // Collinear segment ahead is hit at its near end.
  CHECK(*ray_segment_hit({0, 0}, {1, 0}, {{2, 0}, {4, 0}}) == doctest::Approx(2.0));
}

TEST_CASE("point_segment_distance against dense sampling") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const Segment s{random_point(rng, -5, 5), random_point(rng, -5, 5)};
    const Vec2 p = random_point(rng, -5, 5);
    double best = 1e300;
    for (int k = 0; k <= 4000; ++k) {
      const double t = k / 4000.0;
      best = std::min(best, distance(p, s.a + (s.b - s.a) * t));
    }
    const double d = point_segment_distance(p, s);
    CHECK(d <= best + 1e-12);
    CHECK(best - d <= distance(s.a, s.b) / 4000.0);
  }
}

TEST_CASE("oriented rectangle") {
  const OrientedRect r{{1.0, 1.0}, 1.0, 0.5, std::numbers::pi / 2};
  SUBCASE("axes after a quarter turn") {
    CHECK(r.contains({1.0, 1.9}));
    CHECK_FALSE(r.contains({1.9, 1.0}));
    CHECK(r.contains({1.5, 2.0}));
    CHECK_FALSE(r.contains_strictly({1.5, 2.0}));
  }
  SUBCASE("corners lie on the boundary") {
    for (const auto& c : r.corners()) {
      CHECK(r.distance_to(c) == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
  SUBCASE("segment intersection agrees with polygon edges") {
    Rng rng(8);
    const auto c = r.corners();
    for (int i = 0; i < 5000; ++i) {
      const Segment s{random_point(rng, -2, 4), random_point(rng, -2, 4)};
      bool oracle = r.contains(s.a) || r.contains(s.b);
      for (std::size_t k = 0; k < 4; ++k) oracle |= parametric_cross(s, {c[k], c[(k + 1) % 4]});
      CHECK(r.intersects(s) == oracle);
    }
  }
  SUBCASE("distance to an outside point") {
    CHECK(r.distance_to({1.0, 3.0}) == doctest::Approx(1.0));
    CHECK(r.distance_to({2.5, 3.0}) == doctest::Approx(std::hypot(1.0, 1.0)));
    CHECK(r.distance_to({1.2, 1.2}) == 0.0);
  }
}

TEST_CASE("rng streams") {
  Rng a(5);
  const Rng b(5);
  CHECK(a.split("x")() == b.split("x")());
  CHECK(a.split("x")() != a.split("y")());
  CHECK(a.split(1)() != a.split(2)());
  Rng c = a;
  CHECK(a() == c());
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = a.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(n));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[a.below(7)];
  for (int k : counts) CHECK(std::abs(k - 10000) < 500);
}
