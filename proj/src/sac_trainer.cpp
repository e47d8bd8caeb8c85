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

#include "itorl/sac_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "itorl/errors.hpp"

namespace itorl {

void TrainerConfig::validate() const {
  if (batch <= 0) throw ConfigError("train.batch must be positive");
  if (buffers_per_batch <= 0) throw ConfigError("train.buffers_per_batch must be positive");
  if (!(demo_injection >= 0.0 && demo_injection < 1.0)) throw ConfigError("train.demo_injection must lie in [0, 1)");
  if (!(polyak >= 0.0 && polyak <= 1.0)) throw ConfigError("train.polyak must lie in [0, 1]");
  if (!(entropy_coef > 0.0)) throw ConfigError("train.entropy_coef must be positive");
  if (total_env_steps < 0 || warmup_steps < 0) throw ConfigError("train: step counts must be non-negative");
  if (!(utd >= 0.0)) throw ConfigError("train.utd must be non-negative");
  if (eval_every <= 0) throw ConfigError("train.eval_every must be positive");
  if (buffer_capacity == 0) throw ConfigError("train.buffer_capacity must be positive");
  reward.validate();
}

ReplayBank::ReplayBank(int n_demos, std::size_t total_capacity) {
  if (n_demos <= 0) throw InputError("replay bank: no demonstrations");
  per_buffer_ = std::max<std::size_t>(1, total_capacity / static_cast<std::size_t>(n_demos));
  rings_.resize(static_cast<std::size_t>(n_demos));
}

void ReplayBank::push(Transition t) {
  if (t.demo < 0 || t.demo >= buffers()) throw InputError("replay bank: unknown demo index");
  if (!std::isfinite(t.r)) throw NumericError("replay bank: non-finite reward");
  auto& ring = rings_[static_cast<std::size_t>(t.demo)];
  ++ring.inserted;
  if (ring.data.size() < per_buffer_) {
    ring.data.push_back(std::move(t));
    return;
  }
  ring.data[ring.head] = std::move(t);
  ring.head = (ring.head + 1) % per_buffer_;
}

std::size_t ReplayBank::total_size() const {
  std::size_t n = 0;
  for (const auto& r : rings_) n += r.data.size();
  return n;
}

const Transition& ReplayBank::at(int demo, std::size_t i) const {
  const auto& ring = rings_.at(static_cast<std::size_t>(demo));
  if (i >= ring.data.size()) throw InputError("replay bank: index out of range");
  return ring.data[(ring.head + i) % ring.data.size()];
}

std::vector<int> ReplayBank::non_empty() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < rings_.size(); ++i) {
    if (!rings_[i].data.empty()) out.push_back(static_cast<int>(i));
  }
  return out;
}

void ReplayBank::restore(std::size_t per_buffer, std::vector<Ring> rings) {
  per_buffer_ = per_buffer;
  rings_ = std::move(rings);
}

TrainingData::TrainingData(const TaskSet& t, Normalizer n, bool include_pos)
    : tasks(&t), norm(std::move(n)), include_position(include_pos) {
  for (const auto& d : t.demos) prepared.push_back(std::make_unique<PreparedDemo>(d, norm, include_position));
}

DemoContext TrainingData::context(std::span<const int> demos) const {
  std::vector<const PreparedDemo*> ptrs;
  std::vector<int> sizes;
  for (int d : demos) {
    ptrs.push_back(prepared.at(static_cast<std::size_t>(d)).get());
    sizes.push_back(tasks->map_of(static_cast<std::size_t>(d)).grid_size());
  }
  return make_context(ptrs, norm, sizes);
}

double transition_reward(std::span<const double> normalized_state, Action a, const PreparedDemo& demo,
                         double ending_reward, const TrainerConfig& cfg, const Normalizer& norm) {
  if (cfg.reward_mode == RewardMode::EndingOnly) return cfg.reward.effective_alpha() * ending_reward;
  return itor_reward(normalized_state, a, demo, ending_reward, cfg.reward, norm);
}

namespace {

void set_row(Matrix& m, Eigen::Index r, std::span<const double> v) {
  for (std::size_t c = 0; c < v.size(); ++c) m(r, static_cast<Eigen::Index>(c)) = v[c];
}

std::vector<int> choose_distinct(std::vector<int> pool, int k, Rng& rng) {
  for (int i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(pool.size() - static_cast<std::size_t>(i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

Batch empty_batch(int n, int dim) {
  Batch b;
  b.s.resize(n, dim);
  b.a.resize(n, 2);
  b.r.resize(n, 1);
  b.s_next.resize(n, dim);
  b.done.resize(n, 1);
  b.item_demo.resize(static_cast<std::size_t>(n));
  return b;
}

Matrix gaussian(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Item i of a batch draws from context demo item_demo[i].
std::vector<int> row_demos(const DemoContext& ctx) {
  std::vector<int> out(static_cast<std::size_t>(ctx.rows()));
  for (int d = 0; d < ctx.demos(); ++d) {
    for (int j = 0; j < ctx.lengths[static_cast<std::size_t>(d)]; ++j) {
      out[static_cast<std::size_t>(ctx.offsets[static_cast<std::size_t>(d)] + j)] = d;
    }
  }
  return out;
}

}  // namespace

std::optional<Batch> sample_batch(const ReplayBank& bank, const TrainingData& data, const TrainerConfig& cfg,
                                  Rng& rng) {
  const auto eligible = bank.non_empty();
  const int k = cfg.buffers_per_batch;
  if (static_cast<int>(eligible.size()) < k) return std::nullopt;
  const int dim = data.norm.state_dim();
  Batch b = empty_batch(cfg.batch, dim);
  b.demos = choose_distinct(eligible, k, rng);
  b.injected = static_cast<int>(std::floor(cfg.demo_injection * cfg.batch + 1e-9));
  const double ending = cfg.reward.c;
  for (int i = 0; i < cfg.batch; ++i) {
    const int local = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    const int demo = b.demos[static_cast<std::size_t>(local)];
    b.item_demo[static_cast<std::size_t>(i)] = local;
    if (i < b.injected) {
      const auto& p = *data.prepared[static_cast<std::size_t>(demo)];
      const int steps = p.demo->steps();
      const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(steps, 1))));
      const bool last = j + 1 >= steps;
      const Action a = p.demo->pairs[static_cast<std::size_t>(j)].action;
      set_row(b.s, i, p.states[static_cast<std::size_t>(j)]);
      set_row(b.s_next, i, p.states[static_cast<std::size_t>(std::min(j + 1, steps))]);
      b.a(i, 0) = a.dx;
      b.a(i, 1) = a.dy;
      b.done(i, 0) = last ? 1.0 : 0.0;
      b.r(i, 0) = transition_reward(p.states[static_cast<std::size_t>(j)], a, p, last ? ending : 0.0, cfg, data.norm);
    } else {
      const auto& t = bank.at(demo, rng.below(bank.size(demo)));
      set_row(b.s, i, data.norm.normalize_state(t.s));
      set_row(b.s_next, i, data.norm.normalize_state(t.s_next));
      b.a(i, 0) = t.a.dx;
      b.a(i, 1) = t.a.dy;
      b.r(i, 0) = t.r;
      b.done(i, 0) = t.done ? 1.0 : 0.0;
    }
  }
  return b;
}

Batch sample_demo_batch(const TrainingData& data, int batch, int buffers_per_batch, Rng& rng) {
  const int n = static_cast<int>(data.prepared.size());
  const int k = std::min(buffers_per_batch, n);
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  Batch b = empty_batch(batch, data.norm.state_dim());
  b.demos = choose_distinct(all, k, rng);
  b.injected = batch;
  for (int i = 0; i < batch; ++i) {
    const int local = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    const auto& p = *data.prepared[static_cast<std::size_t>(b.demos[static_cast<std::size_t>(local)])];
    const int steps = p.demo->steps();
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(steps, 1))));
    const Action a = p.demo->pairs[static_cast<std::size_t>(j)].action;
    b.item_demo[static_cast<std::size_t>(i)] = local;
    set_row(b.s, i, p.states[static_cast<std::size_t>(j)]);
    set_row(b.s_next, i, p.states[static_cast<std::size_t>(std::min(j + 1, steps))]);
    b.a(i, 0) = a.dx;
    b.a(i, 1) = a.dy;
    b.r(i, 0) = 0.0;
    b.done(i, 0) = j + 1 >= steps ? 1.0 : 0.0;
  }
  return b;
}

EpisodeStats collect_rollout(const std::function<Action(std::span<const double>)>& act, const TrainingData& data,
                             int demo, const EnvSettings& env, const TrainerConfig& cfg, ReplayBank& bank,
                             Rng& rng) {
  const auto idx = static_cast<std::size_t>(demo);
  const auto& d = data.tasks->demos.at(idx);
  const auto& prepared = *data.prepared.at(idx);
  const TaskParams task = data.tasks->task(idx, env);
  const Rng episode(rng());
  std::vector<Obstacle> obstacles;
  if (env.obstacles) {
    obstacles = spawn_obstacles(*task.map, d, episode.split("obstacles"), env.obstacle_prob, env.max_obstacles);
  }
  Rng start_rng = episode.split("start");
  Rng disturb_rng = episode.split("disturbance");
  EnvState s = reset_for_training(task, d, obstacles, env.obs, start_rng, disturb_rng, env.reset);
  EpisodeStats stats;
  stats.demo = demo;
  while (true) {
    const auto obs = observation(s, env.obs.include_position);
    const Action a = act(obs);
    const auto out = step(s, a, task, obstacles, env.obs, env.ending_c);
    Transition t;
    t.r = transition_reward(data.norm.normalize_state(obs), a, prepared, out.ending_reward, cfg, data.norm);
    t.s = obs;
    t.a = a;
    t.s_next = observation(out.next_state, env.obs.include_position);
    t.done = out.status != Status::Running;
    t.demo = demo;
    stats.return_ += t.r;
    bank.push(std::move(t));
    ++stats.length;
    s = out.next_state;
    if (out.status != Status::Running) {
      stats.status = out.status;
      break;
    }
  }
  return stats;
}

Matrix context_actor_actions(Actor& actor, const DemoContext& ctx) {
  Tape tape(false);
  const auto rows = row_demos(ctx);
  const auto out = actor.forward(tape, ctx, tape.constant(ctx.states), rows);
  return deterministic_action(out).value();
}

BatchContext batch_context(Actor& actor, const Batch& batch, const TrainingData& data) {
  BatchContext bc;
  bc.ctx = data.context(batch.demos);
  bc.actor_actions = context_actor_actions(actor, bc.ctx);
  return bc;
}

Var critic_loss(Tape& tape, ModelParams& params, const Batch& batch, const BatchContext& bc,
                const TrainerConfig& cfg, double entropy_coef, const Matrix& next_noise, const CriticStubs& stubs,
                Matrix* targets_out, const DropoutContext* drop) {
  const DemoContext& ctx = bc.ctx;
  const Matrix& actor_ctx = bc.actor_actions;
  Matrix target_q;
  Matrix next_log_prob;
  {
    Tape t(false);
    Matrix next_action;
    if (!stubs.target_q || !stubs.next_log_prob) {
      const auto pol = params.actor.forward(t, ctx, t.constant(batch.s_next), batch.item_demo);
      const auto sample = sample_squashed(pol, next_noise);
      next_action = sample.action.value();
      next_log_prob = sample.log_prob.value();
    }
    if (stubs.next_log_prob) next_log_prob = stubs.next_log_prob(batch);
    if (stubs.target_q) {
      target_q = stubs.target_q(batch);
    } else {
      const Var sn = t.constant(batch.s_next);
      const Var an = t.constant(next_action);
      const Matrix q1 = params.target1.forward(t, ctx, actor_ctx, sn, an, batch.item_demo).value();
      const Matrix q2 = params.target2.forward(t, ctx, actor_ctx, sn, an, batch.item_demo).value();
      target_q = q1.cwiseMin(q2);
    }
  }
  const Matrix not_done = Matrix::Ones(batch.size(), 1) - batch.done;
  const Matrix y = batch.r + cfg.reward.gamma * not_done.cwiseProduct(target_q - entropy_coef * next_log_prob);
  if (targets_out != nullptr) *targets_out = y;
  const Var s = tape.constant(batch.s);
  const Var a = tape.constant(batch.a);
  const Var yc = tape.constant(y);
  const Var q1 = params.critic1.forward(tape, ctx, actor_ctx, s, a, batch.item_demo, drop);
  const Var q2 = params.critic2.forward(tape, ctx, actor_ctx, s, a, batch.item_demo, drop);
  return ad::mean(ad::scale(ad::add(ad::square(ad::sub(q1, yc)), ad::square(ad::sub(q2, yc))), 0.5));
}

Var actor_loss(Tape& tape, ModelParams& params, const Batch& batch, const BatchContext& bc, double entropy_coef,
               const Matrix& noise, Matrix* log_prob_out, const DropoutContext* drop) {
  const DemoContext& ctx = bc.ctx;
  const Matrix& actor_ctx = bc.actor_actions;
  const auto pol = params.actor.forward(tape, ctx, tape.constant(batch.s), batch.item_demo, drop);
  const auto sample = sample_squashed(pol, noise);
  if (log_prob_out != nullptr) *log_prob_out = sample.log_prob.value();
  const Var s = tape.constant(batch.s);
  const Var q1 = params.critic1.forward(tape, ctx, actor_ctx, s, sample.action, batch.item_demo, drop, false);
  const Var q2 = params.critic2.forward(tape, ctx, actor_ctx, s, sample.action, batch.item_demo, drop, false);
  return ad::mean(ad::sub(ad::scale(sample.log_prob, entropy_coef), ad::minimum(q1, q2)));
}

Var bc_loss(Tape& tape, Actor& actor, const Batch& batch, const TrainingData& data, const DropoutContext* drop) {
  const DemoContext ctx = data.context(batch.demos);
  const auto pol = actor.forward(tape, ctx, tape.constant(batch.s), batch.item_demo, drop);
  const Var diff = ad::sub(deterministic_action(pol), tape.constant(batch.a));
  return ad::mean(ad::row_sum(ad::square(diff)));
}

std::string metrics_header() {
  return "step,critic_loss,actor_loss,entropy_coef,success_seen,success_new_demo,success_new_map";
}

std::string metrics_line(const MetricsRow& row) {
  auto f = [](double v) -> std::string {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
  };
  std::ostringstream out;
  out << row.step << ',' << f(row.critic_loss) << ',' << f(row.actor_loss) << ',' << f(row.entropy_coef) << ','
      << f(row.success_seen) << ',' << f(row.success_new_demo) << ',' << f(row.success_new_map);
  return out.str();
}

namespace {

const TaskSet& checked_tasks(const TrainerInputs& in) {
  in.train.validate();
  in.model.validate();
  if (in.train_tasks == nullptr || in.train_tasks->empty()) throw InputError("trainer: empty training set");
  return *in.train_tasks;
}

}  // namespace

Trainer::Trainer(const TrainerInputs& in)
    : in_(in),
      data_(checked_tasks(in), fit_normalizer(in.train_tasks->demos, in.env.obs.include_position),
            in.env.obs.include_position),
      params_(std::make_unique<ModelParams>(in.model, in.env.obs.dim(), in.train.seed)),
      critic_opt_(params_->critic_parameters(), in.train.optimizer),
      actor_opt_(params_->actor.parameters(), in.train.optimizer),
      alpha_opt_({&params_->log_alpha}, in.train.optimizer),
      bank_(static_cast<int>(in.train_tasks->size()), in.train.buffer_capacity),
      rollout_rng_(Rng(in.train.seed).split("rollout")),
      update_rng_(Rng(in.train.seed).split("update")) {
  params_->log_alpha.value(0, 0) = std::log(in.train.entropy_coef);
}

double Trainer::entropy_coef() const {
  if (in_.train.entropy_mode == EntropyMode::Fixed) return in_.train.entropy_coef;
  return std::exp(params_->log_alpha.value(0, 0));
}

UpdateStats Trainer::update(const Batch& batch) {
  const double ent = entropy_coef();
  const Matrix next_noise = gaussian(batch.size(), 2, update_rng_);
  const Matrix noise = gaussian(batch.size(), 2, update_rng_);
  DropoutContext drop{in_.model.dropout, &update_rng_};
  const DropoutContext* dp = in_.model.dropout > 0.0 ? &drop : nullptr;
  const BatchContext bc = batch_context(params_->actor, batch, data_);
  UpdateStats st;
  {
    critic_opt_.zero_grad();
    Tape tape;
    const Var loss = critic_loss(tape, *params_, batch, bc, in_.train, ent, next_noise, {}, nullptr, dp);
    tape.backward(loss);
    critic_opt_.step();
    st.critic_loss = loss.value()(0, 0);
  }
  Matrix log_prob;
  {
    actor_opt_.zero_grad();
    Tape tape;
    const Var loss = actor_loss(tape, *params_, batch, bc, ent, noise, &log_prob, dp);
    tape.backward(loss);
    actor_opt_.step();
    st.actor_loss = loss.value()(0, 0);
  }
  if (in_.train.entropy_mode == EntropyMode::Auto) {
    // d/d(log alpha) of -log_alpha * mean(log_pi + target_entropy).
    params_->log_alpha.grad(0, 0) = -(log_prob.mean() + in_.train.target_entropy);
    alpha_opt_.step();
  }
  params_->target_update(in_.train.polyak);
  st.entropy_coef = entropy_coef();
  ++updates_;
  loss_sum_critic_ += st.critic_loss;
  loss_sum_actor_ += st.actor_loss;
  ++loss_count_;
  return st;
}

UpdateStats Trainer::bc_update(const Batch& batch) {
  DropoutContext drop{in_.model.dropout, &update_rng_};
  actor_opt_.zero_grad();
  Tape tape;
  const Var loss = bc_loss(tape, params_->actor, batch, data_, in_.model.dropout > 0.0 ? &drop : nullptr);
  tape.backward(loss);
  actor_opt_.step();
  UpdateStats st;
  st.actor_loss = loss.value()(0, 0);
  st.entropy_coef = 0.0;
  ++updates_;
  loss_sum_actor_ += st.actor_loss;
  ++loss_count_;
  return st;
}

MetricsRow Trainer::evaluate_now() {
  MetricsRow row;
  row.step = in_.train.behavior_cloning ? updates_ : env_steps_;
  row.critic_loss = loss_count_ ? loss_sum_critic_ / static_cast<double>(loss_count_) : 0.0;
  row.actor_loss = loss_count_ ? loss_sum_actor_ / static_cast<double>(loss_count_) : 0.0;
  row.entropy_coef = in_.train.behavior_cloning ? 0.0 : entropy_coef();
  loss_sum_critic_ = loss_sum_actor_ = 0.0;
  loss_count_ = 0;
  ActorPolicy policy(params_->actor, data_.norm, in_.env.obs.include_position);
  EvalOptions opts;
  opts.episodes = in_.train.eval_episodes;
  opts.seed = in_.train.seed;
  opts.env = in_.env;
  row.success_seen = evaluate_split(policy, *in_.train_tasks, "seen", opts).rate;
  if (in_.eval_new_demo != nullptr && !in_.eval_new_demo->empty()) {
    row.success_new_demo = evaluate_split(policy, *in_.eval_new_demo, "new_demo", opts).rate;
  }
  if (in_.eval_new_map != nullptr && !in_.eval_new_map->empty()) {
    row.success_new_map = evaluate_split(policy, *in_.eval_new_map, "new_map", opts).rate;
  }
  return row;
}

void Trainer::maybe_evaluate(bool force) {
  const long long progress = in_.train.behavior_cloning ? updates_ : env_steps_;
  bool wrote = false;
  if (force || progress >= next_eval_) {
    if (metrics_.empty() || metrics_.back().step != progress) metrics_.push_back(evaluate_now());
    while (next_eval_ <= progress) next_eval_ += in_.train.eval_every;
    if (!in_.out_dir.empty()) {
      write_metrics((std::filesystem::path(in_.out_dir) / "metrics.csv").string());
      wrote = true;
    }
  }
  if (!in_.out_dir.empty() && in_.train.checkpoint_every > 0 && progress >= next_checkpoint_) {
    while (next_checkpoint_ <= progress) next_checkpoint_ += in_.train.checkpoint_every;
    if (!wrote) write_metrics((std::filesystem::path(in_.out_dir) / "metrics.csv").string());
    save_checkpoint((std::filesystem::path(in_.out_dir) / "checkpoint.bin").string());
  }
}

void Trainer::step_episode() {
  const int n = static_cast<int>(data_.prepared.size());
  const int demo = static_cast<int>(rollout_rng_.below(static_cast<std::uint64_t>(n)));
  EpisodeStats stats;
  if (env_steps_ < in_.train.warmup_steps) {
    auto act = [this](std::span<const double>) {
      return Action{rollout_rng_.uniform(-1.0, 1.0), rollout_rng_.uniform(-1.0, 1.0)};
    };
    stats = collect_rollout(act, data_, demo, in_.env, in_.train, bank_, rollout_rng_);
  } else {
    const auto& task_map = data_.tasks->map_of(static_cast<std::size_t>(demo));
    ActorSession session(params_->actor, *data_.prepared[static_cast<std::size_t>(demo)], data_.norm,
                         task_map.grid_size());
    auto act = [&](std::span<const double> obs) { return session.sample(obs, rollout_rng_); };
    stats = collect_rollout(act, data_, demo, in_.env, in_.train, bank_, rollout_rng_);
  }
  env_steps_ += stats.length;
  ++episodes_;
  if (env_steps_ >= in_.train.warmup_steps) {
    const auto n_updates = std::llround(in_.train.utd * stats.length);
    for (long long i = 0; i < n_updates; ++i) {
      auto batch = sample_batch(bank_, data_, in_.train, update_rng_);
      if (!batch) break;
      update(*batch);
    }
  }
}

void Trainer::bc_iteration() {
  const auto batch = sample_demo_batch(data_, in_.train.batch, in_.train.buffers_per_batch, update_rng_);
  bc_update(batch);
}

void Trainer::run() { run_until(std::numeric_limits<long long>::max()); }

void Trainer::run_until(long long limit) {
  if (!in_.out_dir.empty()) std::filesystem::create_directories(in_.out_dir);
  if (metrics_.empty()) maybe_evaluate(true);
  if (in_.train.behavior_cloning) {
    const long long stop = std::min(limit, in_.train.bc_updates);
    while (updates_ < stop) {
      bc_iteration();
      maybe_evaluate(false);
    }
  } else {
    const long long stop = std::min(limit, in_.train.total_env_steps);
    while (env_steps_ < stop) {
      step_episode();
      maybe_evaluate(false);
    }
  }
  if (!in_.out_dir.empty()) {
    write_metrics((std::filesystem::path(in_.out_dir) / "metrics.csv").string());
    save_checkpoint((std::filesystem::path(in_.out_dir) / "checkpoint.bin").string());
  }
}

void Trainer::write_metrics(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp);
    out << metrics_header() << '\n';
    for (const auto& r : metrics_) out << metrics_line(r) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace itorl
