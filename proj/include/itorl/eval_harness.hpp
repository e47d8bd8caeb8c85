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
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "itorl/da_net.hpp"
#include "itorl/demo_gen.hpp"
#include "itorl/imitator_reward.hpp"
#include "itorl/maze_env.hpp"

namespace itorl {

/// Episode-level environment switches shared by training and evaluation.
struct EnvSettings {
  ObservationConfig obs;
  bool obstacles = false;
  double obstacle_prob = 0.1;
  int max_obstacles = 4;
  int horizon = 50;
  double goal_radius = 0.5;
  double ending_c = 1.0;
  ResetOptions reset;
};

/// Demonstrations together with the maps they were recorded on.
struct TaskSet {
  std::vector<Demonstration> demos;
  std::map<std::string, std::shared_ptr<const MazeMap>> maps;

  std::size_t size() const { return demos.size(); }
  bool empty() const { return demos.empty(); }
  const MazeMap& map_of(std::size_t i) const;
  std::shared_ptr<const MazeMap> map_ptr(std::size_t i) const;
  TaskParams task(std::size_t i, const EnvSettings& env) const;
  void add_map(std::shared_ptr<const MazeMap> m) { maps[m->map_id()] = std::move(m); }
};

/// Anything that maps states to actions for one episode at a time.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin(const TaskParams& task, const Demonstration& demo,
                     std::span<const Obstacle> obstacles) = 0;
  virtual Action act(const EnvState& state) = 0;
};

/// Deterministic actor: tanh of the Gaussian mean.
class ActorPolicy : public Policy {
 public:
  ActorPolicy(Actor& actor, const Normalizer& norm, bool include_position);
  void begin(const TaskParams& task, const Demonstration& demo,
             std::span<const Obstacle> obstacles) override;
  Action act(const EnvState& state) override;
  const AttentionTrace* trace() const { return session_ ? &session_->trace() : nullptr; }

 private:
  Actor& actor_;
  const Normalizer& norm_;
  bool include_position_;
  std::unique_ptr<PreparedDemo> prepared_;
  std::unique_ptr<ActorSession> session_;
};

class OraclePolicy : public Policy {
 public:
  void begin(const TaskParams& task, const Demonstration& demo,
             std::span<const Obstacle> obstacles) override;
  Action act(const EnvState& state) override;

 private:
  TaskParams task_;
  const Demonstration* demo_ = nullptr;
  std::vector<Obstacle> obstacles_;
};

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  void begin(const TaskParams&, const Demonstration&, std::span<const Obstacle>) override {}
  Action act(const EnvState&) override { return {rng_.uniform(-1.0, 1.0), rng_.uniform(-1.0, 1.0)}; }

 private:
  Rng rng_;
};

class ImmobilePolicy : public Policy {
 public:
  void begin(const TaskParams&, const Demonstration&, std::span<const Obstacle>) override {}
  Action act(const EnvState&) override { return {0.0, 0.0}; }
};

struct EpisodeResult {
  Status status = Status::Running;
  int steps = 0;
  std::vector<Vec2> positions;  // start included
  std::vector<Obstacle> obstacles;
  bool policy_failed = false;   // non-finite or out-of-range action
};

/// One deterministic rollout from `start` (map start when empty).
EpisodeResult run_episode(Policy& policy, const TaskSet& tasks, std::size_t index,
                          const EnvSettings& env, std::uint64_t episode_seed,
                          std::optional<Vec2> start = std::nullopt);

struct SplitReport {
  int successes = 0;
  int episodes = 0;
  int skipped = 0;
  double rate = 0.0;
  double stderr_ = 0.0;
};

struct EvalReport {
  std::map<std::string, SplitReport> splits;
};

struct EvalOptions {
  /// Episodes per split; 0 runs every task once.
  int episodes = 100;
  std::uint64_t seed = 0;
  EnvSettings env;
};

/// Success rate of one split. Episode e uses task e mod |tasks| and an
/// obstacle stream derived from (seed, split, e).
SplitReport evaluate_split(Policy& policy, const TaskSet& tasks, const std::string& split,
                           const EvalOptions& opts);
EvalReport evaluate(Policy& policy, const std::map<std::string, const TaskSet*>& splits,
                    const EvalOptions& opts);

struct OffsetPoint {
  double offset = 0.0;
  SplitReport result;
  int rejections = 0;
};

/// Start displaced from map.start by a uniform sample in [-r, r]^2 for each
/// range r; displaced starts inside geometry are resampled.
std::vector<OffsetPoint> offset_range_test(Policy& policy, const TaskSet& tasks,
                                           std::span<const double> offsets,
                                           const EvalOptions& opts);

/// Agent-step x demo-step weights of the final attention layer, averaged
/// over heads, for the actor queried at `states`.
Matrix attention_heatmap(Actor& actor, const Demonstration& demo, const Normalizer& norm,
                         int grid_size, const std::vector<EnvState>& states, bool include_position);

std::string heatmap_csv(const Matrix& m);
std::string heatmap_svg(const Matrix& m);

/// Vector drawing of a map, its demo, obstacles and a rollout. Output is a
/// pure function of the inputs.
std::string render_trajectory(const MazeMap& map, const Demonstration* demo,
                              std::span<const Vec2> rollout, std::span<const Obstacle> obstacles);

/// Mean weight inside the |agent step - demo step| <= band diagonal band.
double diagonal_band_mass(const Matrix& weights, int band);
/// Same statistic for uniform rows over the same shape.
double uniform_band_mass(int rows, int cols, int band);

struct AttentionStats {
  double band_mass = 0.0;     // mean over rollouts of diagonal_band_mass
  double uniform_mass = 0.0;  // the same for uniform rows of each shape
  int rollouts = 0;
};

/// Final-layer attention recorded while the actor drives `rollouts`
/// episodes (task e mod |tasks|) from the map start.
AttentionStats attention_diagonal(ActorPolicy& policy, const TaskSet& tasks, const EnvSettings& env,
                                  int rollouts, int band, std::uint64_t seed);

}  // namespace itorl
