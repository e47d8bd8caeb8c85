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

#include "itorl/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "itorl/errors.hpp"

namespace itorl {

const MazeMap& TaskSet::map_of(std::size_t i) const { return *map_ptr(i); }

std::shared_ptr<const MazeMap> TaskSet::map_ptr(std::size_t i) const {
  const auto it = maps.find(demos.at(i).map_id);
  if (it == maps.end()) throw InputError("task set: unknown map " + demos[i].map_id);
  return it->second;
}

TaskParams TaskSet::task(std::size_t i, const EnvSettings& env) const {
  TaskParams t;
  t.map = map_ptr(i);
  t.goal = demos[i].goal;
  t.goal_radius = demos[i].goal_radius;
  t.horizon = env.horizon;
  t.obstacle_prob = env.obstacles ? env.obstacle_prob : 0.0;
  t.max_obstacles = env.obstacles ? env.max_obstacles : 0;
  return t;
}

ActorPolicy::ActorPolicy(Actor& actor, const Normalizer& norm, bool include_position)
    : actor_(actor), norm_(norm), include_position_(include_position) {}

void ActorPolicy::begin(const TaskParams& task, const Demonstration& demo, std::span<const Obstacle>) {
  session_.reset();
  prepared_ = std::make_unique<PreparedDemo>(demo, norm_, include_position_);
  session_ = std::make_unique<ActorSession>(actor_, *prepared_, norm_, task.map->grid_size());
}

Action ActorPolicy::act(const EnvState& state) {
  const auto obs = observation(state, include_position_);
  return session_->act(obs);
}

void OraclePolicy::begin(const TaskParams& task, const Demonstration& demo,
                         std::span<const Obstacle> obstacles) {
  task_ = task;
  demo_ = &demo;
  obstacles_.assign(obstacles.begin(), obstacles.end());
}

Action OraclePolicy::act(const EnvState& state) {
  const Scene scene{task_.map.get(), obstacles_};
  return oracle_policy(state, *demo_, scene, task_).action;
}

namespace {

bool valid_action(Action a) {
  return std::isfinite(a.dx) && std::isfinite(a.dy) && std::abs(a.dx) <= 1.0 && std::abs(a.dy) <= 1.0;
}

void finish(SplitReport& r) {
  if (r.episodes == 0) return;
  r.rate = static_cast<double>(r.successes) / r.episodes;
  r.stderr_ = std::sqrt(r.rate * (1.0 - r.rate) / r.episodes);
}

std::uint64_t split_key(const std::string& split) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : split) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

EpisodeResult run_episode(Policy& policy, const TaskSet& tasks, std::size_t index, const EnvSettings& env,
                          std::uint64_t episode_seed, std::optional<Vec2> start) {
  const auto& demo = tasks.demos.at(index);
  const TaskParams task = tasks.task(index, env);
  EpisodeResult res;
  if (env.obstacles) {
    res.obstacles = spawn_obstacles(*task.map, demo, Rng(episode_seed).split("obstacles"), env.obstacle_prob,
                                    env.max_obstacles);
  }
  EnvState s = start ? reset_at(task, res.obstacles, env.obs, *start)
                     : reset_for_evaluation(task, res.obstacles, env.obs);
  policy.begin(task, demo, res.obstacles);
  res.positions.push_back(s.position);
  while (true) {
    const Action a = policy.act(s);
    if (!valid_action(a)) {
      res.policy_failed = true;
      res.status = Status::Dead;
      break;
    }
    const auto out = step(s, a, task, res.obstacles, env.obs, env.ending_c);
    s = out.next_state;
    res.positions.push_back(s.position);
    res.steps = s.t;
    if (out.status != Status::Running) {
      res.status = out.status;
      break;
    }
  }
  return res;
}

SplitReport evaluate_split(Policy& policy, const TaskSet& tasks, const std::string& split,
                           const EvalOptions& opts) {
  SplitReport r;
  if (tasks.empty()) return r;
  const int n = opts.episodes > 0 ? opts.episodes : static_cast<int>(tasks.size());
  const Rng root = Rng(opts.seed).split(split_key(split));
  for (int e = 0; e < n; ++e) {
    const auto idx = static_cast<std::size_t>(e) % tasks.size();
    if (tasks.demos[idx].pairs.empty()) {
      ++r.skipped;
      continue;
    }
    const auto res = run_episode(policy, tasks, idx, opts.env, root.split(static_cast<std::uint64_t>(e))());
    ++r.episodes;
    if (res.status == Status::Success) ++r.successes;
  }
  finish(r);
  return r;
}

EvalReport evaluate(Policy& policy, const std::map<std::string, const TaskSet*>& splits,
                    const EvalOptions& opts) {
  EvalReport report;
  for (const auto& [name, tasks] : splits) {
    if (tasks != nullptr) report.splits[name] = evaluate_split(policy, *tasks, name, opts);
  }
  return report;
}

std::vector<OffsetPoint> offset_range_test(Policy& policy, const TaskSet& tasks, std::span<const double> offsets,
                                           const EvalOptions& opts) {
  std::vector<OffsetPoint> curve;
  if (tasks.empty()) return curve;
  EnvSettings env = opts.env;
  env.obstacles = false;
  const int n = opts.episodes > 0 ? opts.episodes : static_cast<int>(tasks.size());
  const Rng root = Rng(opts.seed).split(split_key("offset"));
  for (const double range : offsets) {
    if (range < 0.0) throw InputError("offset_range_test: negative range");
    OffsetPoint pt;
    pt.offset = range;
    const Rng eval_root = Rng(opts.seed).split(split_key("offset_eval"));
    for (int e = 0; e < n; ++e) {
      const auto idx = static_cast<std::size_t>(e) % tasks.size();
      const auto& map = tasks.map_of(idx);
      const Scene scene{&map, {}};
      Rng offset_rng = root.split(static_cast<std::uint64_t>(e));
      Vec2 start = map.start();
      if (range > 0.0) {
        while (true) {
          const Vec2 p = map.start() + Vec2{offset_rng.uniform(-range, range), offset_rng.uniform(-range, range)};
          if (scene.free(p) && distance(p, tasks.demos[idx].goal) > tasks.demos[idx].goal_radius) {
            start = p;
            break;
          }
          ++pt.rejections;
        }
      }
      const auto res = run_episode(policy, tasks, idx, env, eval_root.split(static_cast<std::uint64_t>(e))(), start);
      ++pt.result.episodes;
      if (res.status == Status::Success) ++pt.result.successes;
    }
    finish(pt.result);
    curve.push_back(pt);
  }
  return curve;
}

Matrix attention_heatmap(Actor& actor, const Demonstration& demo, const Normalizer& norm, int grid_size,
                         const std::vector<EnvState>& states, bool include_position) {
  const PreparedDemo prepared(demo, norm, include_position);
  ActorSession session(actor, prepared, norm, grid_size);
  std::vector<std::vector<double>> raw;
  raw.reserve(states.size());
  for (const auto& s : states) raw.push_back(observation(s, include_position));
  AttentionTrace trace;
  session.act_batch(raw, &trace);
  if (trace.layers.empty()) throw InputError("attention_heatmap: actor has no attention layers");
  return trace.head_average();
}

std::string heatmap_csv(const Matrix& m) {
  std::ostringstream out;
  char buf[32];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", m(r, c));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string heatmap_svg(const Matrix& m) {
  const int cell = 8;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << m.cols() * cell << "\" height=\""
      << m.rows() * cell << "\">\n";
  const double peak = m.size() ? std::max(m.maxCoeff(), 1e-12) : 1.0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const int level = static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(m(r, c) / peak, 0.0, 1.0))));
      out << "<rect x=\"" << c * cell << "\" y=\"" << r * cell << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"rgb(255," << level << ',' << level << ")\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string render_trajectory(const MazeMap& map, const Demonstration* demo, std::span<const Vec2> rollout,
                              std::span<const Obstacle> obstacles) {
  const double scale = 20.0;
  const double size = map.grid_size() * scale;
  // y grows upward in the world and downward in SVG.
  auto X = [&](double x) { return num(x * scale); };
  auto Y = [&](double y) { return num(size - y * scale); };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(size) << "\" height=\"" << num(size)
      << "\" viewBox=\"0 0 " << num(size) << ' ' << num(size) << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << num(size) << "\" height=\"" << num(size) << "\" fill=\"white\"/>\n";
  for (const auto& o : obstacles) {
    const auto c = o.rect().corners();
    out << "<polygon fill=\"saddlebrown\" points=\"";
    for (std::size_t i = 0; i < c.size(); ++i) out << (i ? " " : "") << X(c[i].x) << ',' << Y(c[i].y);
    out << "\"/>\n";
  }
  for (const auto& w : map.walls()) {
    out << "<line x1=\"" << X(w.a.x) << "\" y1=\"" << Y(w.a.y) << "\" x2=\"" << X(w.b.x) << "\" y2=\"" << Y(w.b.y)
        << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
  }
  if (demo != nullptr) {
    for (const auto& p : demo->pairs) {
      out << "<circle cx=\"" << X(p.state.position.x) << "\" cy=\"" << Y(p.state.position.y)
          << "\" r=\"2.5\" fill=\"gray\"/>\n";
    }
    out << "<circle cx=\"" << X(demo->goal.x) << "\" cy=\"" << Y(demo->goal.y) << "\" r=\""
        << num(demo->goal_radius * scale) << "\" fill=\"green\" fill-opacity=\"0.6\"/>\n";
  }
  if (!rollout.empty()) {
    out << "<polyline fill=\"none\" stroke=\"red\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < rollout.size(); ++i) {
      const double x = std::clamp(rollout[i].x, 0.0, static_cast<double>(map.grid_size()));
      const double y = std::clamp(rollout[i].y, 0.0, static_cast<double>(map.grid_size()));
      out << (i ? " " : "") << X(x) << ',' << Y(y);
    }
    out << "\"/>\n";
  }
  out << "<circle cx=\"" << X(map.start().x) << "\" cy=\"" << Y(map.start().y) << "\" r=\"5\" fill=\"blue\"/>\n";
  out << "</svg>\n";
  return out.str();
}

double diagonal_band_mass(const Matrix& weights, int band) {
  if (weights.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    const Eigen::Index center = std::min<Eigen::Index>(r, weights.cols() - 1);
    const Eigen::Index lo = std::max<Eigen::Index>(0, center - band);
    const Eigen::Index hi = std::min<Eigen::Index>(weights.cols() - 1, center + band);
    total += weights.row(r).segment(lo, hi - lo + 1).sum();
  }
  return total / static_cast<double>(weights.rows());
}

double uniform_band_mass(int rows, int cols, int band) {
  return diagonal_band_mass(Matrix::Constant(rows, cols, 1.0 / cols), band);
}

AttentionStats attention_diagonal(ActorPolicy& policy, const TaskSet& tasks, const EnvSettings& env,
                                  int rollouts, int band, std::uint64_t seed) {
  AttentionStats st;
  if (tasks.empty()) return st;
  const Rng root = Rng(seed).split(split_key("attention"));
  for (int e = 0; e < rollouts; ++e) {
    const auto idx = static_cast<std::size_t>(e) % tasks.size();
    run_episode(policy, tasks, idx, env, root.split(static_cast<std::uint64_t>(e))());
    const auto* trace = policy.trace();
    if (trace == nullptr || trace->layers.empty()) continue;
    const Matrix w = trace->head_average();
    st.band_mass += diagonal_band_mass(w, band);
    st.uniform_mass += uniform_band_mass(static_cast<int>(w.rows()), static_cast<int>(w.cols()), band);
    ++st.rollouts;
  }
  if (st.rollouts > 0) {
    st.band_mass /= st.rollouts;
    st.uniform_mass /= st.rollouts;
  }
  return st;
}

}  // namespace itorl
