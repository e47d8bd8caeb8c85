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


#include "itorl/selfcheck.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>

#include "itorl/eval_harness.hpp"
#include "itorl/sac_trainer.hpp"

namespace itorl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

ModelConfig check_model() {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.hidden = 16;
  cfg.actor_encoder_layers = 2;
  cfg.actor_attention_layers = 2;
  cfg.critic_encoder_layers = 2;
  cfg.critic_attention_layers = 2;
  return cfg;
}

// Largest relative error between the tape gradient and central differences
// over randomly chosen coordinates.
double fd_error(std::vector<Parameter*> params, const std::function<Var(Tape&)>& loss, int samples, Rng& rng) {
  const auto analytic = gradients(params, loss);
  auto value = [&] {
    Tape t(false);
    return loss(t).value()(0, 0);
  };
  std::size_t total = 0;
  for (auto* p : params) total += static_cast<std::size_t>(p->value.size());
  const double h = 1e-5;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    std::size_t k = rng.below(total);
    std::size_t p = 0;
    while (k >= static_cast<std::size_t>(params[p]->value.size())) k -= static_cast<std::size_t>(params[p++]->value.size());
    double& x = params[p]->value.data()[k];
    const double saved = x;
    x = saved + h;
    const double up = value();
    x = saved - h;
    const double down = value();
    x = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[p].data()[k];
    worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
  }
  return worst;
}

}  // namespace

std::vector<CheckResult> check_gradients(const CheckOptions& opts) {
  TaskSet tasks;
  auto map = std::make_shared<const MazeMap>(generate_maze(opts.seed + 5, 12, 2));
  tasks.add_map(map);
  tasks.demos = generate_demos(*map, 6, Rng(opts.seed).split("demos"), {});
  TrainingData data(tasks, fit_normalizer(tasks.demos, true), true);
  EnvSettings env;
  TrainerConfig cfg;
  cfg.batch = 16;
  cfg.buffers_per_batch = 3;
  ReplayBank bank(static_cast<int>(tasks.size()), 2000);
  Rng rng = Rng(opts.seed).split("gradients");
  auto act = [&](std::span<const double>) { return Action{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}; };
  for (int d = 0; d < static_cast<int>(tasks.size()); ++d) collect_rollout(act, data, d, env, cfg, bank, rng);
  const auto batch = sample_batch(bank, data, cfg, rng);
  ModelParams params(check_model(), env.obs.dim(), opts.seed + 1);
  const BatchContext bc = batch_context(params.actor, *batch, data);
  Matrix noise(batch->size(), 2), next_noise(batch->size(), 2);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < next_noise.size(); ++i) next_noise.data()[i] = rng.normal();

  std::vector<CheckResult> out;
  auto run = [&](const std::string& name, std::vector<Parameter*> ps, const std::function<Var(Tape&)>& loss) {
    const auto t0 = Clock::now();
    CheckResult r;
    r.name = name;
    const double err = fd_error(std::move(ps), loss, opts.gradient_coordinates, rng);
    r.pass = err <= opts.gradient_tolerance;
    r.detail = fmt("max relative error %.3g over %.0f coordinates", err, opts.gradient_coordinates);
    r.seconds = seconds_since(t0);
    out.push_back(r);
  };
  run("gradient/actor_forward", params.actor.parameters(), [&](Tape& t) {
    const auto pol = params.actor.forward(t, bc.ctx, t.constant(batch->s), batch->item_demo);
    return ad::add(ad::mean(ad::square(pol.mean)), ad::mean(pol.log_std));
  });
  run("gradient/critic_loss", params.critic_parameters(),
      [&](Tape& t) { return critic_loss(t, params, *batch, bc, cfg, 0.2, next_noise); });
  run("gradient/actor_loss", params.actor.parameters(),
      [&](Tape& t) { return actor_loss(t, params, *batch, bc, 0.2, noise); });
  run("gradient/bc_loss", params.actor.parameters(), [&](Tape& t) { return bc_loss(t, params.actor, *batch, data); });
  return out;
}

std::vector<CheckResult> check_oracle(const CheckOptions& opts) {
  TaskSet tasks;
  const int per_map = 10;
  const int n_maps = (opts.oracle_tasks + per_map - 1) / per_map;
  for (int m = 0; m < n_maps; ++m) {
    auto map = std::make_shared<const MazeMap>(generate_maze(opts.seed + 100 + static_cast<std::uint64_t>(m), 12, 2));
    tasks.add_map(map);
    const int n = std::min(per_map, opts.oracle_tasks - m * per_map);
    for (auto& d : generate_demos(*map, n, Rng(opts.seed).split(static_cast<std::uint64_t>(m)), {})) {
      tasks.demos.push_back(std::move(d));
    }
  }
  std::vector<CheckResult> out;
  OraclePolicy oracle;
  for (const bool obstacles : {false, true}) {
    const auto t0 = Clock::now();
    EvalOptions eo;
    eo.episodes = 0;
    eo.seed = opts.seed;
    eo.env.obstacles = obstacles;
    const auto r = evaluate_split(oracle, tasks, obstacles ? "oracle_obstacles" : "oracle", eo);
    CheckResult c;
    c.name = obstacles ? "oracle/obstacles" : "oracle/obstacle_free";
    c.pass = obstacles ? r.rate >= opts.oracle_obstacle_threshold : r.successes == r.episodes;
    c.detail = fmt("success %.0f of %.0f", r.successes, r.episodes);
    c.seconds = seconds_since(t0);
    out.push_back(c);
  }
  return out;
}

std::vector<CheckResult> check_ray_cast(const CheckOptions& opts) {
  const auto t0 = Clock::now();
  Rng rng = Rng(opts.seed).split("rays");
  const double step = 1e-3;
  const int n_rays = 8;
  const double ray_len = 5.0;
  int checked = 0, agreeing = 0;
  double worst = 0.0;
  for (int m = 0; checked < opts.ray_poses; ++m) {
    const MazeMap map = generate_maze(opts.seed + 200 + static_cast<std::uint64_t>(m), 12, 2);
    const auto demos = generate_demos(map, 1, Rng(m), {});
    const auto obstacles = spawn_obstacles(map, demos.front(), Rng(m).split("obstacles"), 0.5, 4);
    std::vector<Segment> segs = map.walls();
    for (const auto& o : obstacles) {
      const auto c = o.rect().corners();
      for (std::size_t i = 0; i < 4; ++i) segs.push_back({c[i], c[(i + 1) % 4]});
    }
    const Scene scene{&map, obstacles};
    for (int k = 0; k < 200 && checked < opts.ray_poses; ++k) {
      const Vec2 p{rng.uniform(1.0, 11.0), rng.uniform(1.0, 11.0)};
      if (!scene.free(p)) continue;
      const auto rays = ray_cast(map, obstacles, p, n_rays, ray_len);
      for (int r = 0; r < n_rays; ++r) {
        const double ang = 2.0 * std::numbers::pi * r / n_rays;
        const Vec2 dir{std::cos(ang), std::sin(ang)};
        auto blocked = [&](double t0, double t1) {
          const Segment piece{p + dir * t0, p + dir * t1};
          for (const auto& s : segs) {
            if (segments_intersect(piece, s)) return true;
          }
          return false;
        };
        // Coarse chunks first, then fixed steps inside the first blocked chunk.
        const int n = static_cast<int>(std::ceil(ray_len / step));
        const int chunk = 50;
        double marched = ray_len;
        for (int i = 0; i < n && marched == ray_len; i += chunk) {
          const int j = std::min(n, i + chunk);
          if (!blocked(i * step, std::min(j * step, ray_len))) continue;
          for (int q = i; q < j; ++q) {
            if (blocked(q * step, std::min((q + 1) * step, ray_len))) {
              marched = std::min((q + 1) * step, ray_len);
              break;
            }
          }
        }
        const double err = std::abs(marched - rays[static_cast<std::size_t>(r)]);
        worst = std::max(worst, err);
        agreeing += err <= opts.ray_tolerance;
      }
      ++checked;
    }
  }
  CheckResult c;
  c.name = "ray_cast/marcher";
  c.pass = agreeing == checked * n_rays;
  c.detail = fmt("%.0f poses, worst error %.3g", checked, worst);
  c.seconds = seconds_since(t0);
  return {c};
}

std::vector<CheckResult> run_self_checks(const CheckOptions& opts) {
  auto out = check_gradients(opts);
  for (auto& r : check_oracle(opts)) out.push_back(std::move(r));
  for (auto& r : check_ray_cast(opts)) out.push_back(std::move(r));
  return out;
}

}  // namespace itorl
