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
#include <span>
#include <vector>

#include "itorl/demo_gen.hpp"

namespace itorl {

/// Per-dimension affine map to zero mean and unit (population) standard
/// deviation. A scale of zero marks a degenerate dimension, which maps to 0.
struct Normalizer {
  std::vector<double> state_mean;
  std::vector<double> state_scale;
  std::vector<double> action_mean;
  std::vector<double> action_scale;

  static Normalizer identity(int state_dim);

  int state_dim() const { return static_cast<int>(state_mean.size()); }
  std::vector<double> normalize_state(std::span<const double> raw) const;
  std::array<double, 2> normalize_action(Action a) const;
};

/// Statistics over every demo state and every non-terminal demo action.
Normalizer fit_normalizer(std::span<const Demonstration> demos, bool include_position);

enum class AlphaMode { Table, Formula };

struct RewardConfig {
  double eta = 2.0;
  double alpha = 100.0;
  double c = 1.0;
  double gamma = 0.99;
  AlphaMode alpha_mode = AlphaMode::Table;

  /// `alpha` in Table mode, 1 / (c (1 - gamma)) in Formula mode.
  double effective_alpha() const;
  /// Throws ConfigError unless eta > 0, alpha > 0, c > 0 and 0 < gamma < 1.
  void validate() const;
};

/// A demonstration with its states and actions normalized once.
struct PreparedDemo {
  const Demonstration* demo = nullptr;
  bool include_position = true;
  std::vector<std::vector<double>> states;
  std::vector<std::array<double, 2>> actions;

  PreparedDemo(const Demonstration& d, const Normalizer& norm, bool include_position);
};

struct NearestPair {
  int index = -1;
  EnvState expert_state;
  Action expert_action;
  double squared_distance = 0.0;
};

/// Exhaustive arg-min of the normalized squared state distance; the earliest
/// index wins ties. Throws InputError on an empty demo.
NearestPair nearest_pair(const EnvState& s, const Demonstration& demo, const Normalizer& norm,
                         bool include_position = true);
NearestPair nearest_pair(std::span<const double> normalized_state, const PreparedDemo& demo);

/// 1 - min(ds2 + da2 / exp(ds2), eta) + alpha * ending.
double itor_reward_from_distances(double state_sq_dist, double action_sq_dist, double ending_reward,
                                  const RewardConfig& cfg);

double itor_reward(const EnvState& s, Action a, const Demonstration& demo, double ending_reward,
                   const RewardConfig& cfg, const Normalizer& norm, bool include_position = true);
double itor_reward(std::span<const double> normalized_state, Action a, const PreparedDemo& demo,
                   double ending_reward, const RewardConfig& cfg, const Normalizer& norm);

/// 1 - min over the demo of the joint normalized state-action squared distance.
double il_reward(const EnvState& s, Action a, const Demonstration& demo, const Normalizer& norm,
                 bool include_position = true);
double il_reward(std::span<const double> normalized_state, Action a, const PreparedDemo& demo,
                 const Normalizer& norm);

}  // namespace itorl
