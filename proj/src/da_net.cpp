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

#include "itorl/da_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "itorl/errors.hpp"

namespace itorl {

void ModelConfig::validate() const {
  if (d_model <= 0 || hidden <= 0) throw ConfigError("model: widths must be positive");
  if (n_heads <= 0 || d_model % n_heads != 0) {
    throw ConfigError("model: d_model must be divisible by n_heads");
  }
  if (actor_encoder_layers < 1 || actor_attention_layers < 1 || critic_encoder_layers < 1 ||
      critic_attention_layers < 1) {
    throw ConfigError("model: all depths must be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
  if (!(log_std_min < log_std_max)) throw ConfigError("model: empty log-std band");
}

Var dropout(Tape& tape, const Var& x, const DropoutContext* ctx) {
  (void)tape;
  if (ctx == nullptr || ctx->rate <= 0.0 || ctx->rng == nullptr) return x;
  const double keep = 1.0 - ctx->rate;
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = ctx->rng->uniform() < keep ? 1.0 / keep : 0.0;
  }
  return ad::mul_const(x, mask);
}

Linear::Linear(const std::string& name, int in, int out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (in + out));
  Matrix w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
  weight = Parameter(name + ".weight", std::move(w));
  bias = Parameter(name + ".bias", Matrix::Zero(1, out));
}

Var Linear::operator()(Tape& tape, const Var& x) {
  return ad::linear(x, tape.param(weight), tape.param(bias));
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string& name, int width)
    : gain(name + ".gain", Matrix::Ones(1, width)), bias(name + ".bias", Matrix::Zero(1, width)) {}

Var LayerNorm::operator()(Tape& tape, const Var& x) {
  return ad::layer_norm(x, tape.param(gain), tape.param(bias));
}

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gain);
  out.push_back(&bias);
}

EncoderBlock::EncoderBlock(const std::string& name, int d_model, int hidden, Rng& rng)
    : ff_in(name + ".ff_in", d_model, hidden, rng),
      ff_out(name + ".ff_out", hidden, d_model, rng),
      norm(name + ".norm", d_model) {}

Var EncoderBlock::operator()(Tape& tape, const Var& x, const DropoutContext* drop) {
  const Var h = ff_out(tape, ad::relu(ff_in(tape, dropout(tape, x, drop))));
  return norm(tape, ad::add(x, h));
}

void EncoderBlock::collect(std::vector<Parameter*>& out) {
  ff_in.collect(out);
  ff_out.collect(out);
  norm.collect(out);
}

SequenceEncoder::SequenceEncoder(const std::string& name, int input_dim, int d_model, int hidden,
                                 int layers, Rng& rng)
    : embed(name + ".embed", input_dim, d_model, rng) {
  for (int i = 0; i < layers; ++i) {
    blocks.emplace_back(name + ".block" + std::to_string(i), d_model, hidden, rng);
  }
}

Var SequenceEncoder::encode(Tape& tape, const Var& seq, const Matrix* positional,
                            const DropoutContext* drop) {
  if (seq.rows() == 0) throw ShapeError("encode_sequence: empty sequence");
  if (seq.cols() != embed.weight.value.rows()) throw ShapeError("encode_sequence: input width mismatch");
  Var x = embed(tape, seq);
  if (positional != nullptr) x = ad::add_const(x, *positional);
  for (auto& b : blocks) x = b(tape, x, drop);
  return x;
}

void SequenceEncoder::collect(std::vector<Parameter*>& out) {
  embed.collect(out);
  for (auto& b : blocks) b.collect(out);
}

Matrix sinusoidal_positions(std::span<const int> timesteps, int d_model) {
  Matrix pe(static_cast<Eigen::Index>(timesteps.size()), d_model);
  for (std::size_t r = 0; r < timesteps.size(); ++r) {
    for (int i = 0; i < d_model; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / d_model);
      const double arg = timesteps[r] * freq;
      pe(static_cast<Eigen::Index>(r), i) = (i % 2 == 0) ? std::sin(arg) : std::cos(arg);
    }
  }
  return pe;
}

CrossAttentionLayer::CrossAttentionLayer(const std::string& name, int d_model, int heads, Rng& rng)
    : query(name + ".query", d_model, d_model, rng),
      key(name + ".key", d_model, d_model, rng),
      value(name + ".value", d_model, d_model, rng),
      output(name + ".output", d_model, d_model, rng),
      norm(name + ".norm", d_model),
      n_heads(heads) {}

ad::AttentionOutput CrossAttentionLayer::operator()(Tape& tape, const Var& q, const Var& keys,
                                                    const Var& values, const Matrix& mask) {
  auto att = ad::multihead_attention(query(tape, q), key(tape, keys), value(tape, values), mask, n_heads);
  att.out = norm(tape, output(tape, att.out));
  return att;
}

void CrossAttentionLayer::collect(std::vector<Parameter*>& out) {
  query.collect(out);
  key.collect(out);
  value.collect(out);
  output.collect(out);
  norm.collect(out);
}

AttendResult attend(Tape& tape, std::vector<CrossAttentionLayer>& layers, const Var& q,
                    const Var& keys, const Var& values, const Matrix& mask) {
  if (keys.rows() != values.rows()) throw ShapeError("attend: key and value row counts differ");
  AttendResult r;
  r.out = q;
  for (auto& layer : layers) {
    auto att = layer(tape, r.out, keys, values, mask);
    r.out = att.out;
    r.weights.push_back(std::move(att.weights));
  }
  return r;
}

std::array<double, 2> task_encoding(Vec2 goal, int grid_size) {
  const double half = 0.5 * grid_size;
  const double unit = 0.25 * grid_size;
  return {(goal.x - half) / unit, (goal.y - half) / unit};
}

DemoContext make_context(std::span<const PreparedDemo* const> demos, const Normalizer& norm,
                         std::span<const int> grid_sizes) {
  (void)norm;
  DemoContext ctx;
  int total = 0;
  for (const auto* d : demos) total += static_cast<int>(d->states.size());
  if (total == 0 || demos.empty()) throw InputError("make_context: no demonstration rows");
  const auto dim = static_cast<Eigen::Index>(demos.front()->states.front().size());
  ctx.states.resize(total, dim);
  ctx.actions.resize(total, 2);
  ctx.omega.resize(total, 2);
  int row = 0;
  for (std::size_t k = 0; k < demos.size(); ++k) {
    const auto& d = *demos[k];
    if (d.states.empty()) throw InputError("make_context: empty demonstration");
    const auto omega = task_encoding(d.demo->goal, grid_sizes[k]);
    ctx.offsets.push_back(row);
    ctx.lengths.push_back(static_cast<int>(d.states.size()));
    for (std::size_t i = 0; i < d.states.size(); ++i, ++row) {
      for (Eigen::Index c = 0; c < dim; ++c) ctx.states(row, c) = d.states[i][static_cast<std::size_t>(c)];
      ctx.actions(row, 0) = d.actions[i][0];
      ctx.actions(row, 1) = d.actions[i][1];
      ctx.omega(row, 0) = omega[0];
      ctx.omega(row, 1) = omega[1];
      ctx.timesteps.push_back(static_cast<int>(i));
    }
  }
  return ctx;
}

DemoContext make_context(const PreparedDemo& demo, const Normalizer& norm, int grid_size) {
  const PreparedDemo* ptr = &demo;
  const int gs = grid_size;
  return make_context(std::span<const PreparedDemo* const>(&ptr, 1), norm, std::span<const int>(&gs, 1));
}

Matrix demo_mask(const DemoContext& ctx, std::span<const int> item_demo) {
  Matrix m = Matrix::Constant(static_cast<Eigen::Index>(item_demo.size()), ctx.rows(),
                              -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < item_demo.size(); ++i) {
    const int d = item_demo[i];
    if (d < 0 || d >= ctx.demos()) throw ShapeError("demo_mask: item refers to a missing demo");
    m.row(static_cast<Eigen::Index>(i))
        .segment(ctx.offsets[static_cast<std::size_t>(d)], ctx.lengths[static_cast<std::size_t>(d)])
        .setZero();
  }
  return m;
}

Matrix mean_pool_weights(const DemoContext& ctx, std::span<const int> item_demo) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(item_demo.size()), ctx.rows());
  for (std::size_t i = 0; i < item_demo.size(); ++i) {
    const auto d = static_cast<std::size_t>(item_demo[i]);
    m.row(static_cast<Eigen::Index>(i)).segment(ctx.offsets[d], ctx.lengths[d]).setConstant(1.0 / ctx.lengths[d]);
  }
  return m;
}

Matrix AttentionTrace::head_average(int layer) const {
  if (layers.empty()) return {};
  const auto& heads = layers[layer < 0 ? layers.size() - 1 : static_cast<std::size_t>(layer)];
  Matrix avg = Matrix::Zero(heads.front().rows(), heads.front().cols());
  for (const auto& h : heads) avg += h;
  return avg / static_cast<double>(heads.size());
}

namespace {

Matrix positions_for(const DemoContext& ctx, const ModelConfig& cfg) {
  // Rows are cached per width; contexts only index into them.
  thread_local std::map<int, Matrix> cache;
  Matrix& table = cache[cfg.d_model];
  const int needed = ctx.timesteps.empty() ? 0 : *std::max_element(ctx.timesteps.begin(), ctx.timesteps.end()) + 1;
  if (table.rows() < needed) {
    std::vector<int> steps(static_cast<std::size_t>(std::max(needed, 64)));
    for (std::size_t i = 0; i < steps.size(); ++i) steps[i] = static_cast<int>(i);
    table = sinusoidal_positions(steps, cfg.d_model);
  }
  Matrix pe(static_cast<Eigen::Index>(ctx.timesteps.size()), cfg.d_model);
  for (std::size_t r = 0; r < ctx.timesteps.size(); ++r) pe.row(static_cast<Eigen::Index>(r)) = table.row(ctx.timesteps[r]);
  return pe;
}

}  // namespace

Actor::Actor(const ModelConfig& cfg, int obs_dim, Rng& rng) : cfg_(cfg), obs_dim_(obs_dim) {
  cfg.validate();
  const int d = cfg.d_model;
  const int h = cfg.hidden;
  state_encoder = SequenceEncoder("actor.state_encoder", obs_dim, d, h, cfg.actor_encoder_layers, rng);
  if (cfg.context == ContextMode::Attention) {
    action_encoder = SequenceEncoder("actor.action_encoder", 2, d, h, cfg.actor_encoder_layers, rng);
    for (int i = 0; i < cfg.actor_attention_layers; ++i) {
      layers.emplace_back("actor.attention" + std::to_string(i), d, cfg.n_heads, rng);
    }
  } else {
    pool_encoder = SequenceEncoder("actor.pool_encoder", obs_dim + 2, d, h, cfg.actor_encoder_layers, rng);
  }
  head_hidden = Linear("actor.head_hidden", 2 * d, h, rng);
  head_hidden2 = Linear("actor.head_hidden2", h, h, rng);
  head_out = Linear("actor.head_out", h, 4, rng);
}

Actor::Encoded Actor::encode_demos(Tape& tape, const DemoContext& ctx, const DropoutContext* drop) {
  if (ctx.states.cols() != obs_dim_) throw ShapeError("actor: demo state width mismatch");
  const Matrix pe = positions_for(ctx, cfg_);
  const Matrix* pos = cfg_.positional_encoding ? &pe : nullptr;
  Encoded enc;
  if (cfg_.context == ContextMode::Attention) {
    enc.keys = state_encoder.encode(tape, tape.constant(ctx.states), pos, drop);
    enc.values = action_encoder.encode(tape, tape.constant(ctx.actions), pos, drop);
  } else {
    Matrix joint(ctx.rows(), obs_dim_ + 2);
    joint << ctx.states, ctx.actions;
    enc.values = pool_encoder.encode(tape, tape.constant(joint), pos, drop);
  }
  return enc;
}

PolicyOutput Actor::decide(Tape& tape, const DemoContext& ctx, const Encoded& enc, const Var& queries,
                           std::span<const int> item_demo, const DropoutContext* drop) {
  if (queries.cols() != obs_dim_) throw ShapeError("actor: query width mismatch");
  if (static_cast<std::size_t>(queries.rows()) != item_demo.size()) {
    throw ShapeError("actor: one demo index per query row is required");
  }
  if (!queries.value().allFinite()) throw InputError("actor: non-finite state");
  PolicyOutput out;
  const Var q = state_encoder.encode(tape, queries, nullptr, drop);
  Var context;
  if (cfg_.context == ContextMode::Attention) {
    auto r = attend(tape, layers, q, enc.keys, enc.values, demo_mask(ctx, item_demo));
    context = r.out;
    out.attention = std::move(r.weights);
  } else {
    context = ad::matmul(tape.constant(mean_pool_weights(ctx, item_demo)), enc.values);
  }
  const Var hidden = ad::relu(head_hidden2(tape, ad::relu(head_hidden(tape, ad::concat_cols({context, q})))));
  const Var raw = head_out(tape, hidden);
  out.mean = ad::slice_cols(raw, 0, 2);
  const double half_band = 0.5 * (cfg_.log_std_max - cfg_.log_std_min);
  out.log_std = ad::add_scalar(ad::scale(ad::add_scalar(ad::tanh(ad::slice_cols(raw, 2, 2)), 1.0), half_band),
                               cfg_.log_std_min);
  return out;
}

PolicyOutput Actor::forward(Tape& tape, const DemoContext& ctx, const Var& queries,
                            std::span<const int> item_demo, const DropoutContext* drop) {
  const auto enc = encode_demos(tape, ctx, drop);
  return decide(tape, ctx, enc, queries, item_demo, drop);
}

std::vector<Parameter*> Actor::parameters() {
  std::vector<Parameter*> out;
  state_encoder.collect(out);
  if (cfg_.context == ContextMode::Attention) {
    action_encoder.collect(out);
    for (auto& l : layers) l.collect(out);
  } else {
    pool_encoder.collect(out);
  }
  head_hidden.collect(out);
  head_hidden2.collect(out);
  head_out.collect(out);
  return out;
}

Critic::Critic(const std::string& name, const ModelConfig& cfg, int obs_dim, Rng& rng)
    : cfg_(cfg), obs_dim_(obs_dim) {
  cfg.validate();
  const int d = cfg.d_model;
  const int h = cfg.hidden;
  state_encoder = SequenceEncoder(name + ".state_encoder", obs_dim + 2, d, h, cfg.critic_encoder_layers, rng);
  if (cfg.context == ContextMode::Attention) {
    action_encoder = SequenceEncoder(name + ".action_encoder", 4, d, h, cfg.critic_encoder_layers, rng);
    for (int i = 0; i < cfg.critic_attention_layers; ++i) {
      layers.emplace_back(name + ".attention" + std::to_string(i), d, cfg.n_heads, rng);
    }
  } else {
    pool_encoder = SequenceEncoder(name + ".pool_encoder", obs_dim + 6, d, h, cfg.critic_encoder_layers, rng);
  }
  head_hidden = Linear(name + ".head_hidden", 2 * d + 2, h, rng);
  head_hidden2 = Linear(name + ".head_hidden2", h, h, rng);
  head_out = Linear(name + ".head_out", h, 1, rng);
}

namespace {

struct TrainableScope {
  Tape& tape;
  bool previous;
  TrainableScope(Tape& t, bool on) : tape(t), previous(t.params_trainable()) { t.set_params_trainable(on); }
  ~TrainableScope() { tape.set_params_trainable(previous); }
};

}  // namespace

Var Critic::forward(Tape& tape, const DemoContext& ctx, const Matrix& actor_actions, const Var& queries,
                    const Var& actions, std::span<const int> item_demo, const DropoutContext* drop,
                    bool trainable) {
  if (queries.cols() != obs_dim_ || ctx.states.cols() != obs_dim_) throw ShapeError("critic: state width mismatch");
  if (actions.cols() != 2 || actions.rows() != queries.rows()) throw ShapeError("critic: action shape mismatch");
  if (actor_actions.rows() != ctx.rows() || actor_actions.cols() != 2) {
    throw ShapeError("critic: need one actor action per context row");
  }
  if (static_cast<std::size_t>(queries.rows()) != item_demo.size()) {
    throw ShapeError("critic: one demo index per query row is required");
  }
  if (!queries.value().allFinite() || !actions.value().allFinite()) throw InputError("critic: non-finite input");
  TrainableScope scope(tape, trainable && tape.params_trainable());

  Matrix item_omega(queries.rows(), 2);
  for (std::size_t i = 0; i < item_demo.size(); ++i) {
    item_omega.row(static_cast<Eigen::Index>(i)) = ctx.omega.row(ctx.offsets[static_cast<std::size_t>(item_demo[i])]);
  }
  const Var q = state_encoder.encode(tape, ad::concat_cols({queries, tape.constant(item_omega)}), nullptr, drop);
  const Matrix pe = positions_for(ctx, cfg_);
  const Matrix* pos = cfg_.positional_encoding ? &pe : nullptr;
  Var context;
  if (cfg_.context == ContextMode::Attention) {
    Matrix key_in(ctx.rows(), obs_dim_ + 2);
    key_in << ctx.states, ctx.omega;
    Matrix value_in(ctx.rows(), 4);
    value_in << ctx.actions, actor_actions;
    const Var keys = state_encoder.encode(tape, tape.constant(key_in), pos, drop);
    const Var values = action_encoder.encode(tape, tape.constant(value_in), pos, drop);
    context = attend(tape, layers, q, keys, values, demo_mask(ctx, item_demo)).out;
  } else {
    Matrix joint(ctx.rows(), obs_dim_ + 6);
    joint << ctx.states, ctx.omega, ctx.actions, actor_actions;
    const Var enc = pool_encoder.encode(tape, tape.constant(joint), pos, drop);
    context = ad::matmul(tape.constant(mean_pool_weights(ctx, item_demo)), enc);
  }
  const Var hidden = ad::relu(
      head_hidden2(tape, ad::relu(head_hidden(tape, ad::concat_cols({context, q, actions})))));
  return head_out(tape, hidden);
}

std::vector<Parameter*> Critic::parameters() {
  std::vector<Parameter*> out;
  state_encoder.collect(out);
  if (cfg_.context == ContextMode::Attention) {
    action_encoder.collect(out);
    for (auto& l : layers) l.collect(out);
  } else {
    pool_encoder.collect(out);
  }
  head_hidden.collect(out);
  head_hidden2.collect(out);
  head_out.collect(out);
  return out;
}

SquashedSample sample_squashed(const PolicyOutput& out, const Matrix& noise) {
  if (noise.rows() != out.mean.rows() || noise.cols() != 2) throw ShapeError("sample: noise shape");
  const Var std_dev = ad::exp(out.log_std);
  const Var u = ad::add(out.mean, ad::mul_const(std_dev, noise));
  SquashedSample s;
  s.action = ad::tanh(u);
  // log N(u) = -0.5 eps^2 - log_std - 0.5 log(2 pi); the eps term is constant.
  Matrix gauss_const(noise.rows(), 1);
  gauss_const.col(0) = -0.5 * noise.array().square().rowwise().sum() - std::log(2.0 * std::numbers::pi);
  const Var log_gauss = ad::add_const(ad::scale(ad::row_sum(out.log_std), -1.0), gauss_const);
  // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)).
  const Var correction = ad::scale(
      ad::add_scalar(ad::scale(ad::add(u, ad::softplus(ad::scale(u, -2.0))), -1.0), std::numbers::ln2), 2.0);
  s.log_prob = ad::sub(log_gauss, ad::row_sum(correction));
  return s;
}

Var deterministic_action(const PolicyOutput& out) { return ad::tanh(out.mean); }

ModelParams::ModelParams(const ModelConfig& cfg, int obs, std::uint64_t seed)
    : config(cfg), obs_dim(obs), log_alpha("log_alpha", Matrix::Zero(1, 1)) {
  const Rng root(seed);
  Rng actor_rng = root.split("init.actor");
  Rng c1 = root.split("init.critic1");
  Rng c2 = root.split("init.critic2");
  actor = Actor(cfg, obs, actor_rng);
  critic1 = Critic("critic1", cfg, obs, c1);
  critic2 = Critic("critic2", cfg, obs, c2);
  Rng t1 = root.split("init.critic1");
  Rng t2 = root.split("init.critic2");
  target1 = Critic("target1", cfg, obs, t1);
  target2 = Critic("target2", cfg, obs, t2);
  target_update(0.0);
}

std::vector<Parameter*> ModelParams::critic_parameters() {
  auto a = critic1.parameters();
  auto b = critic2.parameters();
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<Parameter*> ModelParams::target_parameters() {
  auto a = target1.parameters();
  auto b = target2.parameters();
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<Parameter*> ModelParams::all_parameters() {
  auto out = actor.parameters();
  for (auto* p : critic_parameters()) out.push_back(p);
  for (auto* p : target_parameters()) out.push_back(p);
  out.push_back(&log_alpha);
  return out;
}

void ModelParams::target_update(double polyak) {
  auto main = critic_parameters();
  auto target = target_parameters();
  for (std::size_t i = 0; i < main.size(); ++i) {
    if (polyak == 0.0) {
      target[i]->value = main[i]->value;
    } else {
      target[i]->value = polyak * target[i]->value + (1.0 - polyak) * main[i]->value;
    }
  }
}

std::vector<Matrix> gradients(std::span<Parameter* const> params, const std::function<Var(Tape&)>& loss) {
  std::vector<Matrix> saved;
  saved.reserve(params.size());
  for (auto* p : params) {
    saved.push_back(p->grad);
    p->zero_grad();
  }
  Tape tape;
  const Var l = loss(tape);
  tape.backward(l);
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back(params[i]->grad);
    params[i]->grad = saved[i];
  }
  return out;
}

ActorSession::ActorSession(Actor& actor, const PreparedDemo& demo, const Normalizer& norm, int grid_size)
    : actor_(actor), norm_(norm), ctx_(make_context(demo, norm, grid_size)), tape_(false) {
  enc_ = actor_.encode_demos(tape_, ctx_);
}

std::vector<Action> ActorSession::act_batch(const std::vector<std::vector<double>>& raw, AttentionTrace* trace) {
  Matrix q(static_cast<Eigen::Index>(raw.size()), actor_.obs_dim());
  for (std::size_t r = 0; r < raw.size(); ++r) {
    const auto n = norm_.normalize_state(raw[r]);
    for (std::size_t c = 0; c < n.size(); ++c) q(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = n[c];
  }
  const std::vector<int> items(raw.size(), 0);
  auto out = actor_.decide(tape_, ctx_, enc_, tape_.constant(q), items);
  const Matrix a = deterministic_action(out).value();
  if (trace != nullptr) trace->layers = std::move(out.attention);
  std::vector<Action> actions;
  for (Eigen::Index r = 0; r < a.rows(); ++r) actions.push_back({a(r, 0), a(r, 1)});
  return actions;
}

Action ActorSession::act(std::span<const double> raw_observation) {
  AttentionTrace step_trace;
  const auto a = act_batch({std::vector<double>(raw_observation.begin(), raw_observation.end())}, &step_trace);
  if (trace_.layers.empty()) {
    trace_.layers = std::move(step_trace.layers);
  } else {
    for (std::size_t l = 0; l < trace_.layers.size(); ++l) {
      for (std::size_t h = 0; h < trace_.layers[l].size(); ++h) {
        auto& m = trace_.layers[l][h];
        m.conservativeResize(m.rows() + 1, Eigen::NoChange);
        m.row(m.rows() - 1) = step_trace.layers[l][h].row(0);
      }
    }
  }
  return a.front();
}

Action ActorSession::sample(std::span<const double> raw_observation, Rng& rng) {
  const auto n = norm_.normalize_state(raw_observation);
  Matrix q(1, actor_.obs_dim());
  for (std::size_t c = 0; c < n.size(); ++c) q(0, static_cast<Eigen::Index>(c)) = n[c];
  const std::vector<int> items{0};
  auto out = actor_.decide(tape_, ctx_, enc_, tape_.constant(q), items);
  Matrix noise(1, 2);
  noise << rng.normal(), rng.normal();
  const Matrix a = sample_squashed(out, noise).action.value();
  return {a(0, 0), a(0, 1)};
}

}  // namespace itorl
