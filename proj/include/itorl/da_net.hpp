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
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "itorl/autodiff.hpp"
#include "itorl/imitator_reward.hpp"
#include "itorl/rng.hpp"

namespace itorl {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

/// How the demonstration reaches the heads.
enum class ContextMode {
  Attention,  // demonstration-based cross-attention
  MeanPool,   // ablation: mean of per-step demo encodings
};

struct ModelConfig {
  int d_model = 128;
  int n_heads = 16;
  int hidden = 256;
  int actor_encoder_layers = 3;
  int actor_attention_layers = 6;
  int critic_encoder_layers = 4;
  int critic_attention_layers = 4;
  double dropout = 0.0;
  bool positional_encoding = true;
  ContextMode context = ContextMode::Attention;
  double log_std_min = -5.0;
  double log_std_max = 2.0;

  void validate() const;
};

/// Active only inside training updates.
struct DropoutContext {
  double rate = 0.0;
  Rng* rng = nullptr;
};

Var dropout(Tape& tape, const Var& x, const DropoutContext* ctx);

/// x W + b with Glorot-uniform initialization.
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng);
  Var operator()(Tape& tape, const Var& x);
  void collect(std::vector<Parameter*>& out);
};

struct LayerNorm {
  Parameter gain;
  Parameter bias;

  LayerNorm() = default;
  LayerNorm(const std::string& name, int width);
  Var operator()(Tape& tape, const Var& x);
  void collect(std::vector<Parameter*>& out);
};

/// dropout -> feedforward -> add & norm, with a residual around the
/// feedforward path.
struct EncoderBlock {
  Linear ff_in;
  Linear ff_out;
  LayerNorm norm;

  EncoderBlock() = default;
  EncoderBlock(const std::string& name, int d_model, int hidden, Rng& rng);
  Var operator()(Tape& tape, const Var& x, const DropoutContext* drop);
  void collect(std::vector<Parameter*>& out);
};

/// Per-element sequence encoder: input embedding, optional additive
/// positional rows, then stacked encoder blocks.
struct SequenceEncoder {
  Linear embed;
  std::vector<EncoderBlock> blocks;

  SequenceEncoder() = default;
  SequenceEncoder(const std::string& name, int input_dim, int d_model, int hidden, int layers,
                  Rng& rng);
  Var encode(Tape& tape, const Var& seq, const Matrix* positional = nullptr,
             const DropoutContext* drop = nullptr);
  void collect(std::vector<Parameter*>& out);
};

/// Sinusoidal timestep encoding, one row per timestep.
Matrix sinusoidal_positions(std::span<const int> timesteps, int d_model);

struct CrossAttentionLayer {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  LayerNorm norm;
  int n_heads = 1;

  CrossAttentionLayer() = default;
  CrossAttentionLayer(const std::string& name, int d_model, int n_heads, Rng& rng);
  ad::AttentionOutput operator()(Tape& tape, const Var& q, const Var& keys, const Var& values,
                                 const Matrix& mask);
  void collect(std::vector<Parameter*>& out);
};

struct AttendResult {
  Var out;
  /// [layer][head] -> rows x keys.
  std::vector<std::vector<Matrix>> weights;
};

/// N chained layers; each layer's output is the next layer's query.
AttendResult attend(Tape& tape, std::vector<CrossAttentionLayer>& layers, const Var& q,
                    const Var& keys, const Var& values, const Matrix& mask);

/// Demonstrations stacked row-wise for one forward pass.
struct DemoContext {
  Matrix states;   // normalized expert states
  Matrix actions;  // normalized expert actions
  Matrix omega;    // per-row task encoding (goal)
  std::vector<int> timesteps;
  std::vector<int> offsets;
  std::vector<int> lengths;

  int rows() const { return static_cast<int>(states.rows()); }
  int demos() const { return static_cast<int>(offsets.size()); }
};

/// Goal coordinates relative to the map center, in quarter-map units.
std::array<double, 2> task_encoding(Vec2 goal, int grid_size);

DemoContext make_context(std::span<const PreparedDemo* const> demos, const Normalizer& norm,
                         std::span<const int> grid_sizes);
DemoContext make_context(const PreparedDemo& demo, const Normalizer& norm, int grid_size);

/// 0 where item i's demo owns the key column, -infinity elsewhere.
Matrix demo_mask(const DemoContext& ctx, std::span<const int> item_demo);

/// Rows that average each item's own demo rows.
Matrix mean_pool_weights(const DemoContext& ctx, std::span<const int> item_demo);

struct AttentionTrace {
  /// [layer][head] -> agent steps x demo steps.
  std::vector<std::vector<Matrix>> layers;

  /// Head-averaged weights of one layer (defaults to the last).
  Matrix head_average(int layer = -1) const;
};

struct PolicyOutput {
  Var mean;
  Var log_std;
  std::vector<std::vector<Matrix>> attention;
};

class Actor {
 public:
  Actor() = default;
  Actor(const ModelConfig& cfg, int obs_dim, Rng& rng);

  struct Encoded {
    Var keys;
    Var values;
  };
  Encoded encode_demos(Tape& tape, const DemoContext& ctx, const DropoutContext* drop = nullptr);
  PolicyOutput decide(Tape& tape, const DemoContext& ctx, const Encoded& enc, const Var& queries,
                      std::span<const int> item_demo, const DropoutContext* drop = nullptr);
  PolicyOutput forward(Tape& tape, const DemoContext& ctx, const Var& queries,
                       std::span<const int> item_demo, const DropoutContext* drop = nullptr);

  std::vector<Parameter*> parameters();
  const ModelConfig& config() const { return cfg_; }
  int obs_dim() const { return obs_dim_; }

  SequenceEncoder state_encoder;
  SequenceEncoder action_encoder;
  SequenceEncoder pool_encoder;
  std::vector<CrossAttentionLayer> layers;
  Linear head_hidden;
  Linear head_hidden2;
  Linear head_out;

 private:
  ModelConfig cfg_;
  int obs_dim_ = 0;
};

class Critic {
 public:
  Critic() = default;
  Critic(const std::string& name, const ModelConfig& cfg, int obs_dim, Rng& rng);

  /// Q(s, a; demo, omega). `actor_actions` holds the current actor's
  /// actions on every context row and is treated as a constant.
  Var forward(Tape& tape, const DemoContext& ctx, const Matrix& actor_actions, const Var& queries,
              const Var& actions, std::span<const int> item_demo,
              const DropoutContext* drop = nullptr, bool trainable = true);

  std::vector<Parameter*> parameters();

  SequenceEncoder state_encoder;
  SequenceEncoder action_encoder;
  SequenceEncoder pool_encoder;
  std::vector<CrossAttentionLayer> layers;
  Linear head_hidden;
  Linear head_hidden2;
  Linear head_out;

 private:
  ModelConfig cfg_;
  int obs_dim_ = 0;
};

/// Gaussian parameters to squashed samples with their log-densities.
struct SquashedSample {
  Var action;    // tanh(mean + std * noise)
  Var log_prob;  // rows x 1, including the tanh correction
};
SquashedSample sample_squashed(const PolicyOutput& out, const Matrix& noise);
Var deterministic_action(const PolicyOutput& out);

/// Actor, twin critics, their targets and the entropy temperature.
struct ModelParams {
  ModelConfig config;
  int obs_dim = 0;
  Actor actor;
  Critic critic1;
  Critic critic2;
  Critic target1;
  Critic target2;
  Parameter log_alpha;

  ModelParams(const ModelConfig& cfg, int obs_dim, std::uint64_t seed);
  ModelParams(const ModelParams&) = delete;
  ModelParams& operator=(const ModelParams&) = delete;

  std::vector<Parameter*> critic_parameters();
  std::vector<Parameter*> target_parameters();
  std::vector<Parameter*> all_parameters();
  /// target <- polyak * target + (1 - polyak) * main.
  void target_update(double polyak);
};

/// Fresh tape, loss evaluation and backward pass; returns d(loss)/d(param)
/// for every listed parameter (zeros where the loss does not depend on it).
std::vector<Matrix> gradients(std::span<Parameter* const> params,
                              const std::function<Var(Tape&)>& loss);

/// Deterministic rollout-time policy: encodes one demonstration once and
/// answers per-step queries without recording gradients.
class ActorSession {
 public:
  ActorSession(Actor& actor, const PreparedDemo& demo, const Normalizer& norm, int grid_size);

  Action act(std::span<const double> raw_observation);
  /// Deterministic actions and attention for a batch of raw observations.
  std::vector<Action> act_batch(const std::vector<std::vector<double>>& raw, AttentionTrace* trace);
  /// Sampled action for exploration.
  Action sample(std::span<const double> raw_observation, Rng& rng);
  /// Attention rows recorded by act() since construction.
  const AttentionTrace& trace() const { return trace_; }

 private:
  Actor& actor_;
  const Normalizer& norm_;
  DemoContext ctx_;
  Tape tape_;
  Actor::Encoded enc_;
  AttentionTrace trace_;
};

}  // namespace itorl
