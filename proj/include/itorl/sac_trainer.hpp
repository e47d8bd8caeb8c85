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
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "itorl/da_net.hpp"
#include "itorl/eval_harness.hpp"
#include "itorl/imitator_reward.hpp"
#include "itorl/optimizer.hpp"

namespace itorl {

struct Transition {
  std::vector<double> s;  // raw observation
  Action a;
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;
  int demo = -1;  // index into the training task set
};

/// One FIFO ring buffer per training demonstration.
class ReplayBank {
 public:
  ReplayBank() = default;
  ReplayBank(int n_demos, std::size_t total_capacity);

  void push(Transition t);
  int buffers() const { return static_cast<int>(rings_.size()); }
  std::size_t capacity_per_buffer() const { return per_buffer_; }
  std::size_t size(int demo) const { return rings_.at(static_cast<std::size_t>(demo)).data.size(); }
  std::size_t total_size() const;
  /// i = 0 is the oldest stored transition.
  const Transition& at(int demo, std::size_t i) const;
  std::uint64_t inserted(int demo) const { return rings_.at(static_cast<std::size_t>(demo)).inserted; }
  std::vector<int> non_empty() const;

  struct Ring {
    std::vector<Transition> data;
    std::size_t head = 0;  // next slot to overwrite once full
    std::uint64_t inserted = 0;
  };
  const std::vector<Ring>& rings() const { return rings_; }
  void restore(std::size_t per_buffer, std::vector<Ring> rings);

 private:
  std::size_t per_buffer_ = 0;
  std::vector<Ring> rings_;
};

enum class RewardMode {
  Itor,        // dense imitator reward plus scaled ending reward
  EndingOnly,  // alpha * ending reward, no demonstration term
};

enum class EntropyMode { Auto, Fixed };

struct TrainerConfig {
  OptimizerConfig optimizer;
  int batch = 256;
  int buffers_per_batch = 5;
  double demo_injection = 0.2;
  double polyak = 0.995;
  EntropyMode entropy_mode = EntropyMode::Auto;
  double entropy_coef = 0.2;  // initial (Auto) or constant (Fixed) value
  double target_entropy = -2.0;
  long long total_env_steps = 300000;
  long long warmup_steps = 5000;
  /// Gradient updates per environment step, run after each episode.
  double utd = 1.0;
  long long eval_every = 10000;
  int eval_episodes = 20;
  long long checkpoint_every = 0;  // env steps; 0 = only at the end
  std::size_t buffer_capacity = 100000;
  RewardMode reward_mode = RewardMode::Itor;
  RewardConfig reward;
  bool behavior_cloning = false;
  long long bc_updates = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Training items tagged with the selected demo each belongs to.
struct Batch {
  std::vector<int> demos;  // indices into the task set, one per selected buffer
  std::vector<int> item_demo;  // position in `demos` for every item
  Matrix s;       // normalized
  Matrix a;       // raw action
  Matrix r;       // n x 1
  Matrix s_next;  // normalized
  Matrix done;    // n x 1, 1 when terminal
  int injected = 0;

  int size() const { return static_cast<int>(s.rows()); }
};

/// Demonstrations prepared once for batch assembly.
struct TrainingData {
  const TaskSet* tasks = nullptr;
  Normalizer norm;
  bool include_position = true;
  std::vector<std::unique_ptr<PreparedDemo>> prepared;

  TrainingData(const TaskSet& t, Normalizer n, bool include_position);
  DemoContext context(std::span<const int> demos) const;
};

/// nullopt when fewer than `buffers_per_batch` buffers hold data.
std::optional<Batch> sample_batch(const ReplayBank& bank, const TrainingData& data, const TrainerConfig& cfg,
                                  Rng& rng);

/// Reward for (s, a) given the episode's ending reward.
double transition_reward(std::span<const double> normalized_state, Action a, const PreparedDemo& demo,
                         double ending_reward, const TrainerConfig& cfg, const Normalizer& norm);

struct EpisodeStats {
  int length = 0;
  double return_ = 0.0;
  Status status = Status::Running;
  int demo = -1;
};

/// One training episode from a disturbed demo state; appends transitions.
EpisodeStats collect_rollout(const std::function<Action(std::span<const double>)>& act, const TrainingData& data,
                             int demo, const EnvSettings& env, const TrainerConfig& cfg, ReplayBank& bank, Rng& rng);

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double entropy_coef = 0.0;
};

/// Hooks that let tests replace learned pieces with stubs.
struct CriticStubs {
  /// When set, replaces min(target1, target2) on (s_next, a_next).
  std::function<Matrix(const Batch&)> target_q;
  /// When set, replaces log pi(a_next | s_next).
  std::function<Matrix(const Batch&)> next_log_prob;
};

/// Demo context of a batch plus the current actor's actions on it.
struct BatchContext {
  DemoContext ctx;
  Matrix actor_actions;
};
BatchContext batch_context(Actor& actor, const Batch& batch, const TrainingData& data);

/// Mean over items of 0.5 (Q1 - y)^2 + 0.5 (Q2 - y)^2 on a tape.
Var critic_loss(Tape& tape, ModelParams& params, const Batch& batch, const BatchContext& bc,
                const TrainerConfig& cfg, double entropy_coef, const Matrix& next_noise,
                const CriticStubs& stubs = {}, Matrix* targets_out = nullptr,
                const DropoutContext* drop = nullptr);
/// Mean over items of entropy_coef * log pi - min(Q1, Q2) with critics frozen.
Var actor_loss(Tape& tape, ModelParams& params, const Batch& batch, const BatchContext& bc, double entropy_coef,
               const Matrix& noise, Matrix* log_prob_out = nullptr, const DropoutContext* drop = nullptr);
/// Mean over items of |tanh(mean) - expert action|^2.
Var bc_loss(Tape& tape, Actor& actor, const Batch& batch, const TrainingData& data,
            const DropoutContext* drop = nullptr);

/// Current actor's deterministic actions on every context row.
Matrix context_actor_actions(Actor& actor, const DemoContext& ctx);

/// Demonstration pairs of the selected demos as a behavior-cloning batch.
Batch sample_demo_batch(const TrainingData& data, int batch, int buffers_per_batch, Rng& rng);

struct MetricsRow {
  long long step = 0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double entropy_coef = 0.0;
  double success_seen = std::numeric_limits<double>::quiet_NaN();
  double success_new_demo = std::numeric_limits<double>::quiet_NaN();
  double success_new_map = std::numeric_limits<double>::quiet_NaN();
};

std::string metrics_header();
std::string metrics_line(const MetricsRow& row);

struct TrainerInputs {
  ModelConfig model;
  TrainerConfig train;
  EnvSettings env;
  const TaskSet* train_tasks = nullptr;
  const TaskSet* eval_new_demo = nullptr;
  const TaskSet* eval_new_map = nullptr;
  std::string out_dir;  // empty: nothing written to disk
};

/// Owns the model, optimizers, replay bank and RNG streams of one run.
class Trainer {
 public:
  explicit Trainer(const TrainerInputs& in);

  /// Runs until the configured budget is exhausted.
  void run();
  /// Runs until the env-step counter reaches `limit` (or the budget).
  void run_until(long long limit);

  UpdateStats update(const Batch& batch);
  UpdateStats bc_update(const Batch& batch);
  MetricsRow evaluate_now();

  ModelParams& params() { return *params_; }
  const TrainingData& data() const { return data_; }
  ReplayBank& bank() { return bank_; }
  const std::vector<MetricsRow>& metrics() const { return metrics_; }
  long long env_steps() const { return env_steps_; }
  long long updates() const { return updates_; }
  double entropy_coef() const;
  const TrainerInputs& inputs() const { return in_; }

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);
  /// Writes the metrics CSV (atomically) to `path`.
  void write_metrics(const std::string& path) const;

 private:
  friend struct TrainerState;
  void maybe_evaluate(bool force);
  void step_episode();
  void bc_iteration();

  TrainerInputs in_;
  TrainingData data_;
  std::unique_ptr<ModelParams> params_;
  Optimizer critic_opt_;
  Optimizer actor_opt_;
  Optimizer alpha_opt_;
  ReplayBank bank_;
  Rng rollout_rng_;
  Rng update_rng_;
  long long env_steps_ = 0;
  long long updates_ = 0;
  long long episodes_ = 0;
  long long next_eval_ = 0;
  long long next_checkpoint_ = 0;
  double loss_sum_critic_ = 0.0;
  double loss_sum_actor_ = 0.0;
  long long loss_count_ = 0;
  std::vector<MetricsRow> metrics_;
};

}  // namespace itorl
