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


// Property-based acceptance checks. One line per criterion; exit status is
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <string>

#include "itorl/eval_harness.hpp"
#include "itorl/sac_trainer.hpp"
#include "test_support.hpp"

using namespace itorl;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool in_time = secs <= limit_s;
  const bool pass = o.pass && in_time;
  failures += !pass;
  std::printf("[%s] %2d %-22s %s; %.1fs (limit %.0fs)%s\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
              limit_s, in_time ? "" : " TOO SLOW");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ModelConfig gradient_model() {
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_heads = 4;
  cfg.hidden = 32;
  cfg.actor_encoder_layers = 2;
  cfg.actor_attention_layers = 2;
  cfg.critic_encoder_layers = 2;
  cfg.critic_attention_layers = 2;
  return cfg;
}

Outcome maze_validity() {
  int total = 0, connected = 0;
  for (const int g : {8, 12, 24}) {
    for (int s = 0; s < 1000; ++s) {
      const auto m = generate_maze(static_cast<std::uint64_t>(s), g, 2);
      ++total;
      connected += testing::flood_fill_reachable(m) == m.lattice_size() * m.lattice_size();
    }
  }
  return {connected == total, fmt("%d/%d mazes connected", connected, total)};
}

Outcome ray_cast_oracle() {
  Rng rng(2024);
  int poses = 0, agreeing = 0;
  double worst = 0.0;
  for (std::uint64_t m = 0; poses < 10000; ++m) {
    const auto map = generate_maze(m, 12, 2);
    const auto demos = generate_demos(map, 1, Rng(m), {});
    const auto obstacles = spawn_obstacles(map, demos.front(), Rng(m).split("o"), 0.5, 4);
    const auto segs = testing::blocking_segments(map, obstacles);
    const Scene scene{&map, obstacles};
    for (int k = 0; k < 100 && poses < 10000; ++k) {
      const Vec2 p{rng.uniform(0.5, 11.5), rng.uniform(0.5, 11.5)};
      if (!scene.free(p)) continue;
      const auto rays = ray_cast(map, obstacles, p, 8, 5.0);
      bool ok = true;
      for (int r = 0; r < 8; ++r) {
        const double err =
            std::abs(testing::march_ray(segs, p, 2.0 * std::numbers::pi * r / 8, 5.0) - rays[static_cast<std::size_t>(r)]);
        worst = std::max(worst, err);
        ok = ok && err <= 2e-3;
      }
      agreeing += ok;
      ++poses;
    }
  }
  return {agreeing == poses, fmt("%d/%d poses within 2e-3, worst %.2e", agreeing, poses, worst)};
}

Outcome nearest_pair_oracle() {
  const auto map = generate_maze(5, 12, 2);
  const auto demos = generate_demos(map, 20, Rng(6), {});
  const auto norm = fit_normalizer(demos, true);
  Rng rng(7);
  int agree = 0;
  const int n = 10000;
  for (int q = 0; q < n; ++q) {
    const PreparedDemo p(demos[static_cast<std::size_t>(q) % demos.size()], norm, true);
    std::vector<double> s(p.states.front().size());
    // Half the queries sit exactly on demo states, which exercises ties.
    if (q % 2 == 0) {
      s = p.states[rng.below(p.states.size())];
    } else {
      for (auto& v : s) v = rng.uniform(-3.0, 3.0);
    }
    agree += nearest_pair(s, p).index == testing::brute_nearest(s, p.states);
  }
  return {agree == n, fmt("%d/%d queries agree with brute force", agree, n)};
}

// Exact rational arithmetic for the anti-loitering identity.
struct Rational {
  long long num, den;
  Rational(long long n, long long d = 1) : num(n), den(d) { norm(); }
  void norm() {
    if (den < 0) num = -num, den = -den;
    const long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) num /= g, den /= g;
  }
  Rational operator*(const Rational& o) const { return {num * o.num, den * o.den}; }
  Rational operator-(const Rational& o) const { return {num * o.den - o.num * den, den * o.den}; }
  Rational inverse() const { return {den, num}; }
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
};

Outcome reward_identities() {
  Demonstration d;
  for (int i = 0; i < 5; ++i) {
    DemoPair p;
    p.state.position = {static_cast<double>(i), 0.0};
    p.state.t = i;
    p.action = i + 1 < 5 ? Action{1.0, 0.0} : Action{};
    d.pairs.push_back(p);
  }
  d.goal = {4.0, 0.0};
  const auto id = Normalizer::identity(2);
  RewardConfig cfg;
  auto at = [](double x, double y) {
    EnvState s;
    s.position = {x, y};
    return s;
  };
  const double r0 = itor_reward(at(2, 0), {1.0, 0.0}, d, 0.0, cfg, id);
  const double r1 = itor_reward(at(2, 3), {1.0, 0.0}, d, 0.0, cfg, id);
  const double r2 = itor_reward(at(2, 1), {0.0, 0.0}, d, 0.0, cfg, id);
  const double r3 = itor_reward(at(2, 0), {1.0, 0.0}, d, 1.0, cfg, id);
  const bool values = std::abs(r0 - 1.0) <= 1e-12 && std::abs(r1 + 1.0) <= 1e-12 &&
                      std::abs(r2 - (1.0 - (1.0 + std::exp(-1.0)))) <= 1e-12 && std::abs(r3 - 101.0) <= 1e-12;
  // alpha c - gamma alpha c == 1 for alpha = 1 / (c (1 - gamma)), exactly.
  bool symbolic = true;
  for (const auto& [c, gamma] : {std::pair{Rational(1), Rational(99, 100)}, {Rational(3, 2), Rational(9, 10)},
                                  {Rational(7), Rational(999, 1000)}, {Rational(1, 4), Rational(1, 2)}}) {
    const Rational alpha = (c * (Rational(1) - gamma)).inverse();
    symbolic = symbolic && (alpha * c - gamma * alpha * c) == Rational(1);
  }
  return {values && symbolic, fmt("cases %.12g %.12g %.12g %.12g; exact identity %s", r0, r1, r2, r3,
                                  symbolic ? "holds" : "FAILS")};
}

Outcome oracle_success() {
  TaskSet tasks;
  for (std::uint64_t m = 0; m < 10; ++m) {
    auto map = std::make_shared<const MazeMap>(generate_maze(500 + m, 12, 2));
    tasks.add_map(map);
    for (auto& d : generate_demos(*map, 10, Rng(m), {})) tasks.demos.push_back(std::move(d));
  }
  OraclePolicy oracle;
  EvalOptions opts;
  opts.episodes = 0;
  const auto free = evaluate_split(oracle, tasks, "free", opts);
  opts.env.obstacles = true;  // defaults: p = 0.1, at most 4
  const auto obst = evaluate_split(oracle, tasks, "obstacles", opts);
  return {free.rate == 1.0 && obst.rate >= 0.95,
          fmt("obstacle-free %d/%d, with obstacles %d/%d", free.successes, free.episodes, obst.successes,
              obst.episodes)};
}

Outcome gradient_checks() {
  TaskSet tasks;
  auto map = std::make_shared<const MazeMap>(generate_maze(9, 12, 2));
  tasks.add_map(map);
  tasks.demos = generate_demos(*map, 6, Rng(10), {});
  TrainingData data(tasks, fit_normalizer(tasks.demos, true), true);
  EnvSettings env;
  TrainerConfig cfg;
  cfg.batch = 24;
  cfg.buffers_per_batch = 3;
  ReplayBank bank(static_cast<int>(tasks.size()), 3000);
  Rng rng(11);
  auto act = [&](std::span<const double>) { return Action{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}; };
  for (int d = 0; d < static_cast<int>(tasks.size()); ++d) collect_rollout(act, data, d, env, cfg, bank, rng);
  const auto batch = sample_batch(bank, data, cfg, rng);
  ModelParams params(gradient_model(), env.obs.dim(), 12);
  const BatchContext bc = batch_context(params.actor, *batch, data);
  Matrix noise(batch->size(), 2), next_noise(batch->size(), 2);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < next_noise.size(); ++i) next_noise.data()[i] = rng.normal();

  std::string detail;
  bool ok = true;
  auto check = [&](const char* name, std::vector<Parameter*> ps, const std::function<Var(Tape&)>& loss) {
    const auto g = gradients(ps, loss);
    auto value = [&] {
      Tape t(false);
      const double v = loss(t).value()(0, 0);
      return std::pair{v, t.branch_signature()};
    };
    const auto res = testing::finite_difference_check_smooth(ps, value, g, 200, rng, 1e-5, 1e-6);
    ok = ok && res.coordinates >= 200 && res.max_rel_error <= 1e-4;
    detail += fmt("%s%s %.1e/%d (%d at kinks)", detail.empty() ? "" : ", ", name, res.max_rel_error,
                  res.coordinates, res.straddled);
  };
  check("actor_forward", params.actor.parameters(), [&](Tape& t) {
    const auto pol = params.actor.forward(t, bc.ctx, t.constant(batch->s), batch->item_demo);
    const auto sample = sample_squashed(pol, noise);
    return ad::add(ad::mean(ad::square(sample.action)), ad::mean(sample.log_prob));
  });
  check("J_Q", params.critic_parameters(), [&](Tape& t) { return critic_loss(t, params, *batch, bc, cfg, 0.2, next_noise); });
  check("J_pi", params.actor.parameters(), [&](Tape& t) { return actor_loss(t, params, *batch, bc, 0.2, noise); });
  check("bc", params.actor.parameters(), [&](Tape& t) { return bc_loss(t, params.actor, *batch, data); });
  return {ok, "max rel error/coords " + detail};
}

Outcome attention_invariants() {
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_heads = 4;
  cfg.hidden = 32;
  cfg.actor_encoder_layers = 1;
  cfg.actor_attention_layers = 2;
  Rng rng(13);
  std::vector<std::shared_ptr<const MazeMap>> maps;
  std::vector<std::vector<Demonstration>> demos;
  for (std::uint64_t m = 0; m < 5; ++m) {
    maps.push_back(std::make_shared<const MazeMap>(generate_maze(700 + m, 12, 2)));
    demos.push_back(generate_demos(*maps.back(), 8, Rng(m), {}));
  }
  double worst_sum = 0.0;
  int rows = 0;
  for (int f = 0; f < 1000; ++f) {
    const auto& pool = demos[static_cast<std::size_t>(f) % demos.size()];
    const auto norm = fit_normalizer(pool, true);
    Actor actor(cfg, 10, rng);
    const auto& demo = pool[rng.below(pool.size())];
    std::vector<EnvState> states;
    const int n = 1 + static_cast<int>(rng.below(8));
    for (int k = 0; k < n; ++k) {
      EnvState s = demo.pairs[rng.below(demo.pairs.size())].state;
      s.position = s.position + Vec2{rng.normal() * 0.3, rng.normal() * 0.3};
      states.push_back(s);
    }
    const Matrix h = attention_heatmap(actor, demo, norm, 12, states, true);
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
      worst_sum = std::max(worst_sum, std::abs(h.row(r).sum() - 1.0));
      ++rows;
    }
  }
  double worst_shift = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int k = 1 + static_cast<int>(rng.below(30)), d = 1 + static_cast<int>(rng.below(16));
    Matrix keys(k, d);
    Eigen::RowVectorXd q(d), u(d);
    for (Eigen::Index i = 0; i < keys.size(); ++i) keys.data()[i] = rng.uniform(-3, 3);
    for (int i = 0; i < d; ++i) q(i) = rng.uniform(-3, 3), u(i) = rng.uniform(-5, 5);
    const Matrix shifted = keys.rowwise() + u;
    worst_shift = std::max(worst_shift, (ad::attention_weights(q, keys) - ad::attention_weights(q, shifted)).cwiseAbs().maxCoeff());
  }
  return {worst_sum <= 1e-6 && worst_shift <= 1e-12,
          fmt("%d rows, worst |sum-1| %.1e; worst shift change %.1e", rows, worst_sum, worst_shift)};
}

}  // namespace

int main() {
  report(1, "maze validity", 60, maze_validity);
  report(2, "ray-cast oracle", 60, ray_cast_oracle);
  report(3, "nearest-pair oracle", 60, nearest_pair_oracle);
  report(4, "reward identities", 1, reward_identities);
  report(5, "oracle success", 300, oracle_success);
  report(6, "gradient checks", 600, gradient_checks);
  report(7, "attention invariants", 60, attention_invariants);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
