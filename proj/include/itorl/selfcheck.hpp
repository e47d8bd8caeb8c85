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
#include <string>
#include <vector>

namespace itorl {

struct CheckOptions {
  int gradient_coordinates = 200;
  double gradient_tolerance = 1e-4;
  int oracle_tasks = 100;
  double oracle_obstacle_threshold = 0.95;
  int ray_poses = 2000;
  double ray_tolerance = 2e-3;
  std::uint64_t seed = 0;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// Finite-difference gradients of the three training losses.
std::vector<CheckResult> check_gradients(const CheckOptions& opts);
/// Oracle success from map.start, with and without obstacles.
std::vector<CheckResult> check_oracle(const CheckOptions& opts);
/// Analytic ray casts against a fixed-step marcher.
std::vector<CheckResult> check_ray_cast(const CheckOptions& opts);

std::vector<CheckResult> run_self_checks(const CheckOptions& opts);

}  // namespace itorl
