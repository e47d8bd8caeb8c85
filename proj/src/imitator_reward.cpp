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

#include "itorl/imitator_reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "itorl/errors.hpp"

namespace itorl {

Normalizer Normalizer::identity(int state_dim) {
  Normalizer n;
  n.state_mean.assign(static_cast<std::size_t>(state_dim), 0.0);
  n.state_scale.assign(static_cast<std::size_t>(state_dim), 1.0);
  n.action_mean.assign(2, 0.0);
  n.action_scale.assign(2, 1.0);
  return n;
}

std::vector<double> Normalizer::normalize_state(std::span<const double> raw) const {
  if (raw.size() != state_mean.size()) throw ShapeError("normalize_state: dimension mismatch");
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = state_scale[i] > 0.0 ? (raw[i] - state_mean[i]) / state_scale[i] : 0.0;
  }
  return out;
}

std::array<double, 2> Normalizer::normalize_action(Action a) const {
  const double raw[2] = {a.dx, a.dy};
  std::array<double, 2> out{};
  for (std::size_t i = 0; i < 2; ++i) {
    out[i] = action_scale[i] > 0.0 ? (raw[i] - action_mean[i]) / action_scale[i] : 0.0;
  }
  return out;
}

namespace {

void mean_and_scale(const std::vector<std::vector<double>>& rows, std::size_t dim,
                    std::vector<double>& mean, std::vector<double>& scale) {
  mean.assign(dim, 0.0);
  scale.assign(dim, 0.0);
  if (rows.empty()) return;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < dim; ++i) mean[i] += r[i];
  }
  for (auto& m : mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < dim; ++i) scale[i] += (r[i] - mean[i]) * (r[i] - mean[i]);
  }
  for (std::size_t i = 0; i < dim; ++i) {
    const double sd = std::sqrt(scale[i] / static_cast<double>(rows.size()));
    // Spreads at round-off level count as degenerate.
    scale[i] = sd > 1e-12 * std::max(1.0, std::abs(mean[i])) ? sd : 0.0;
  }
}

}  // namespace

Normalizer fit_normalizer(std::span<const Demonstration> demos, bool include_position) {
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> actions;
  for (const auto& d : demos) {
    for (std::size_t i = 0; i < d.pairs.size(); ++i) {
      states.push_back(observation(d.pairs[i].state, include_position));
      if (i + 1 < d.pairs.size()) actions.push_back({d.pairs[i].action.dx, d.pairs[i].action.dy});
    }
  }
  if (states.empty()) throw InputError("fit_normalizer: empty corpus");
  Normalizer n;
  mean_and_scale(states, states.front().size(), n.state_mean, n.state_scale);
  mean_and_scale(actions, 2, n.action_mean, n.action_scale);
  return n;
}

double RewardConfig::effective_alpha() const {
  return alpha_mode == AlphaMode::Formula ? 1.0 / (c * (1.0 - gamma)) : alpha;
}

void RewardConfig::validate() const {
  if (!(eta > 0.0)) throw ConfigError("reward: eta must be positive");
  if (!(c > 0.0)) throw ConfigError("reward: c must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("reward: gamma must lie in (0, 1)");
  if (!(effective_alpha() > 0.0)) throw ConfigError("reward: alpha must be positive");
}

PreparedDemo::PreparedDemo(const Demonstration& d, const Normalizer& norm, bool include_pos)
    : demo(&d), include_position(include_pos) {
  states.reserve(d.pairs.size());
  actions.reserve(d.pairs.size());
  for (const auto& p : d.pairs) {
    states.push_back(norm.normalize_state(observation(p.state, include_position)));
    actions.push_back(norm.normalize_action(p.action));
  }
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double action_squared_distance(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
}

void check_action(Action a) {
  if (!std::isfinite(a.dx) || !std::isfinite(a.dy) || std::abs(a.dx) > 1.0 || std::abs(a.dy) > 1.0) {
    throw InputError("reward: action outside [-1, 1]^2");
  }
}

}  // namespace

NearestPair nearest_pair(std::span<const double> normalized_state, const PreparedDemo& demo) {
  if (demo.states.empty()) throw InputError("nearest_pair: empty demonstration");
  if (normalized_state.size() != demo.states.front().size()) {
    throw ShapeError("nearest_pair: state dimension mismatch");
  }
  NearestPair best;
  best.squared_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < demo.states.size(); ++i) {
    const double d = squared_distance(normalized_state, demo.states[i]);
    if (d < best.squared_distance) {
      best.squared_distance = d;
      best.index = static_cast<int>(i);
    }
  }
  const auto& pair = demo.demo->pairs[static_cast<std::size_t>(best.index)];
  best.expert_state = pair.state;
  best.expert_action = pair.action;
  return best;
}

NearestPair nearest_pair(const EnvState& s, const Demonstration& demo, const Normalizer& norm,
                         bool include_position) {
  if (demo.pairs.empty()) throw InputError("nearest_pair: empty demonstration");
  const PreparedDemo prepared(demo, norm, include_position);
  const auto q = norm.normalize_state(observation(s, include_position));
  return nearest_pair(q, prepared);
}

double itor_reward_from_distances(double state_sq_dist, double action_sq_dist, double ending_reward,
                                  const RewardConfig& cfg) {
  const double penalty = state_sq_dist + action_sq_dist / std::exp(state_sq_dist);
  return 1.0 - std::min(penalty, cfg.eta) + cfg.effective_alpha() * ending_reward;
}

double itor_reward(std::span<const double> normalized_state, Action a, const PreparedDemo& demo,
                   double ending_reward, const RewardConfig& cfg, const Normalizer& norm) {
  check_action(a);
  const NearestPair np = nearest_pair(normalized_state, demo);
  const double da2 =
      action_squared_distance(norm.normalize_action(a), demo.actions[static_cast<std::size_t>(np.index)]);
  return itor_reward_from_distances(np.squared_distance, da2, ending_reward, cfg);
}

double itor_reward(const EnvState& s, Action a, const Demonstration& demo, double ending_reward,
                   const RewardConfig& cfg, const Normalizer& norm, bool include_position) {
  if (demo.pairs.empty()) throw InputError("itor_reward: empty demonstration");
  const PreparedDemo prepared(demo, norm, include_position);
  const auto q = norm.normalize_state(observation(s, include_position));
  return itor_reward(q, a, prepared, ending_reward, cfg, norm);
}

double il_reward(std::span<const double> normalized_state, Action a, const PreparedDemo& demo,
                 const Normalizer& norm) {
  if (demo.states.empty()) throw InputError("il_reward: empty demonstration");
  check_action(a);
  const auto na = norm.normalize_action(a);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < demo.states.size(); ++i) {
    best = std::min(best, squared_distance(normalized_state, demo.states[i]) +
                              action_squared_distance(na, demo.actions[i]));
  }
  return 1.0 - best;
}

double il_reward(const EnvState& s, Action a, const Demonstration& demo, const Normalizer& norm,
                 bool include_position) {
  if (demo.pairs.empty()) throw InputError("il_reward: empty demonstration");
  const PreparedDemo prepared(demo, norm, include_position);
  return il_reward(norm.normalize_state(observation(s, include_position)), a, prepared, norm);
}

}  // namespace itorl
