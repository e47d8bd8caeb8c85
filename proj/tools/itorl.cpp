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


// Command-line driver: gen-maps, gen-demos, train, eval, render, check.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <set>

#include "itorl/config.hpp"
#include "itorl/errors.hpp"
#include "itorl/eval_harness.hpp"
#include "itorl/io.hpp"
#include "itorl/sac_trainer.hpp"
#include "itorl/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace itorl;

namespace {

enum ExitCode { kOk = 0, kRuntime = 1, kConfig = 2, kCheckFailed = 3, kNumeric = 4 };

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Layout {
  fs::path root;
  fs::path maps() const { return root / "maps"; }
  fs::path demos() const { return root / "demos"; }
  fs::path train() const { return root / "train"; }
  fs::path eval() const { return root / "eval"; }
  fs::path render() const { return root / "render"; }
  fs::path checkpoint() const { return train() / "checkpoint.bin"; }
};

const char* const kSplits[] = {"seen", "new_demo", "new_map"};

std::string split_file(const std::string& split) { return (split == "seen" ? "train" : split) + ".jsonl"; }

void write_json(const fs::path& p, const Json& j) { write_file_atomic(p.string(), j.dump(2) + "\n"); }

Json read_json(const fs::path& p) {
  const std::string text = read_file(p.string());
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

TaskSet load_split(const Layout& out, const std::string& split) {
  TaskSet ts;
  const fs::path file = out.demos() / split_file(split);
  if (!fs::exists(file)) throw InputError(file.string() + " not found; run gen-demos first");
  ts.demos = read_demos_jsonl(file.string());
  for (const auto& d : ts.demos) {
    if (ts.maps.count(d.map_id) == 0) {
      ts.add_map(std::make_shared<const MazeMap>(read_map((out.maps() / (d.map_id + ".json")).string())));
    }
  }
  return ts;
}

int cmd_gen_maps(const RunConfig& cfg, const Layout& out) {
  fs::create_directories(out.maps());
  const auto maps = make_maps(cfg.dataset);
  const auto held = held_out_ids(cfg.dataset, maps);
  Json train = Json::array(), eval = Json::array(), seeds = Json::array();
  for (const auto& map : maps) {
    write_map((out.maps() / (map->map_id() + ".json")).string(), *map);
    (held.count(map->map_id()) ? eval : train).push_back(map->map_id());
    seeds.push_back(map->seed());
    std::printf("map %s seed %llu\n", map->map_id().c_str(), static_cast<unsigned long long>(map->seed()));
  }
  write_json(out.maps() / "manifest.json", {{"train", train}, {"eval", eval}, {"seeds", seeds}});
  std::printf("%zu train maps, %zu held-out maps in %s\n", train.size(), eval.size(), out.maps().c_str());
  return kOk;
}

int cmd_gen_demos(const RunConfig& cfg, const Layout& out) {
  const fs::path manifest = out.maps() / "manifest.json";
  if (!fs::exists(manifest)) throw InputError(manifest.string() + " not found; run gen-maps first");
  const Json m = read_json(manifest);
  std::vector<std::shared_ptr<const MazeMap>> maps;
  std::set<std::string> held;
  for (const char* key : {"train", "eval"}) {
    for (const auto& id : m.at(key)) {
      maps.push_back(std::make_shared<const MazeMap>(read_map((out.maps() / (id.get<std::string>() + ".json")).string())));
      if (std::string(key) == "eval") held.insert(id.get<std::string>());
    }
  }
  const auto split = make_dataset(cfg, maps, held);
  int audited = 0;
  if (cfg.dataset.replay_audit) {
    for (const auto* part : {&split.train, &split.eval_new_demo, &split.eval_new_map}) {
      const TaskSet ts = make_task_set(*part, maps);
      for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto& demo = ts.demos[i];
        const auto r = replay_demo(ts.map_ptr(i), demo, cfg.env.obs, cfg.env.horizon);
        if (r.status != Status::Success || r.max_error > 1e-6) {
          throw CheckFailure("replay audit: demo " + demo.demo_id + " ended " + to_string(r.status));
        }
        ++audited;
      }
    }
  }
  fs::create_directories(out.demos());
  write_file_atomic((out.demos() / "train.jsonl").string(), demos_to_jsonl(split.train));
  write_file_atomic((out.demos() / "new_demo.jsonl").string(), demos_to_jsonl(split.eval_new_demo));
  write_file_atomic((out.demos() / "new_map.jsonl").string(), demos_to_jsonl(split.eval_new_map));
  auto ids_of = [](const std::vector<Demonstration>& v) {
    Json a = Json::array();
    for (const auto& d : v) a.push_back(d.demo_id);
    return a;
  };
  write_json(out.demos() / "manifest.json",
             {{"train", ids_of(split.train)},
              {"new_demo", ids_of(split.eval_new_demo)},
              {"new_map", ids_of(split.eval_new_map)},
              {"replay_audited", audited}});
  std::printf("demos: %zu train, %zu new_demo, %zu new_map (%d replay-audited)\n", split.train.size(),
              split.eval_new_demo.size(), split.eval_new_map.size(), audited);
  return kOk;
}

int cmd_train(const RunConfig& cfg, const Layout& out, const std::string& resume) {
  const TaskSet train = load_split(out, "seen");
  const TaskSet new_demo = load_split(out, "new_demo");
  const TaskSet new_map = load_split(out, "new_map");
  TrainerInputs in;
  in.model = cfg.model;
  in.train = cfg.train;
  in.env = cfg.env;
  in.train_tasks = &train;
  in.eval_new_demo = new_demo.empty() ? nullptr : &new_demo;
  in.eval_new_map = new_map.empty() ? nullptr : &new_map;
  in.out_dir = out.train().string();
  Trainer trainer(in);
  if (!resume.empty()) trainer.load_checkpoint(resume);
  trainer.run();
  const auto& last = trainer.metrics().back();
  std::printf("trained %lld env steps, %lld updates; seen %.3f new_demo %.3f new_map %.3f\n", trainer.env_steps(),
              trainer.updates(), last.success_seen, last.success_new_demo, last.success_new_map);
  return kOk;
}

struct PolicyHolder {
  LoadedModel model;
  std::unique_ptr<Policy> policy;
  ActorPolicy* actor = nullptr;
};

PolicyHolder make_policy(const RunConfig& cfg, const std::string& checkpoint, EnvSettings& env) {
  PolicyHolder h;
  const auto& name = cfg.eval.policy;
  if (name == "actor") {
    h.model = load_model(checkpoint);
    env.obs = h.model.obs;
    auto p = std::make_unique<ActorPolicy>(h.model.params->actor, h.model.norm, h.model.obs.include_position);
    h.actor = p.get();
    h.policy = std::move(p);
  } else if (name == "oracle") {
    h.policy = std::make_unique<OraclePolicy>();
  } else if (name == "immobile") {
    h.policy = std::make_unique<ImmobilePolicy>();
  } else {
    h.policy = std::make_unique<RandomPolicy>(cfg.eval.seed);
  }
  return h;
}

int cmd_eval(const RunConfig& cfg, const Layout& out, const std::string& checkpoint) {
  EnvSettings env = cfg.env;
  PolicyHolder h = make_policy(cfg, checkpoint, env);
  std::map<std::string, TaskSet> sets;
  std::map<std::string, const TaskSet*> splits;
  for (const char* s : kSplits) {
    sets[s] = load_split(out, s);
    if (!sets[s].empty()) splits[s] = &sets[s];
  }
  EvalOptions opts;
  opts.episodes = cfg.eval.episodes;
  opts.seed = cfg.eval.seed;
  opts.env = env;
  const auto report = evaluate(*h.policy, splits, opts);
  Json j = {{"policy", cfg.eval.policy}, {"episodes", cfg.eval.episodes}, {"splits", Json::object()}};
  for (const auto& [name, r] : report.splits) {
    j["splits"][name] = {{"successes", r.successes}, {"episodes", r.episodes}, {"rate", r.rate},
                         {"stderr", r.stderr_}};
    std::printf("%-9s success %.3f +- %.3f (%d/%d)\n", name.c_str(), r.rate, r.stderr_, r.successes, r.episodes);
  }
  if (!cfg.eval.offsets.empty() && !sets["seen"].empty()) {
    Json curve = Json::array();
    for (const auto& pt : offset_range_test(*h.policy, sets["seen"], cfg.eval.offsets, opts)) {
      curve.push_back({{"offset", pt.offset}, {"rate", pt.result.rate}, {"stderr", pt.result.stderr_},
                       {"rejections", pt.rejections}});
      std::printf("offset %-5g success %.3f\n", pt.offset, pt.result.rate);
    }
    j["offsets"] = curve;
  }
  if (h.actor != nullptr && cfg.eval.attention_rollouts > 0 && !sets["seen"].empty()) {
    const auto a = attention_diagonal(*h.actor, sets["seen"], env, cfg.eval.attention_rollouts,
                                      cfg.eval.attention_band, cfg.eval.seed);
    j["attention"] = {{"band", cfg.eval.attention_band}, {"band_mass", a.band_mass},
                      {"uniform_mass", a.uniform_mass}, {"rollouts", a.rollouts}};
    std::printf("attention band mass %.3f (uniform %.3f)\n", a.band_mass, a.uniform_mass);
  }
  fs::create_directories(out.eval());
  write_json(out.eval() / "report.json", j);
  return kOk;
}

int cmd_render(const RunConfig& cfg, const Layout& out, const std::string& checkpoint, const std::string& split,
               int index, std::uint64_t seed) {
  EnvSettings env = cfg.env;
  PolicyHolder h = make_policy(cfg, checkpoint, env);
  const TaskSet tasks = load_split(out, split);
  if (index < 0 || static_cast<std::size_t>(index) >= tasks.size()) {
    throw InputError("render: index " + std::to_string(index) + " outside split " + split);
  }
  const auto i = static_cast<std::size_t>(index);
  const auto res = run_episode(*h.policy, tasks, i, env, seed);
  fs::create_directories(out.render());
  const std::string stem = split + "_" + std::to_string(index);
  const fs::path svg = out.render() / (stem + ".svg");
  write_file_atomic(svg.string(), render_trajectory(tasks.map_of(i), &tasks.demos[i], res.positions, res.obstacles));
  std::printf("%s: %s after %d steps\n", svg.c_str(), to_string(res.status), res.steps);
  if (h.actor != nullptr && h.actor->trace() != nullptr && !h.actor->trace()->layers.empty()) {
    const Matrix w = h.actor->trace()->head_average();
    write_file_atomic((out.render() / (stem + "_attention.svg")).string(), heatmap_svg(w));
    write_file_atomic((out.render() / (stem + "_attention.csv")).string(), heatmap_csv(w));
  }
  return kOk;
}

int cmd_check(const CheckOptions& opts) {
  bool ok = true;
  auto report = [&](const std::vector<CheckResult>& rs) {
    for (const auto& r : rs) {
      std::printf("%s %-24s %s (%.1fs)\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
      std::fflush(stdout);
      ok = ok && r.pass;
    }
  };
  report(check_gradients(opts));
  report(check_oracle(opts));
  report(check_ray_cast(opts));
  if (!ok) throw CheckFailure("self-check failed");
  return kOk;
}

// "--a.b=v" and "--a.b v" become "a.b=v".
std::vector<std::string> overrides_from(std::vector<std::string> extras) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string s = extras[i];
    if (s.rfind("--", 0) != 0 || s.find('.') == std::string::npos) {
      throw ConfigError("unexpected argument '" + s + "'");
    }
    s = s.substr(2);
    if (s.find('=') == std::string::npos) {
      if (i + 1 >= extras.size()) throw ConfigError("override --" + s + " lacks a value");
      s += "=" + extras[++i];
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Imitator learning benchmark: maze tasks, demonstrations, training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_extras();
  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON run configuration (defaults when omitted)");

  auto* gen_maps = app.add_subcommand("gen-maps", "generate mazes and the map manifest");
  auto* gen_demos = app.add_subcommand("gen-demos", "synthesize demonstrations and split them");
  auto* train = app.add_subcommand("train", "train the actor-critic");
  std::string resume;
  train->add_option("--resume", resume, "checkpoint to continue from");
  auto* eval = app.add_subcommand("eval", "evaluate a policy on the seen, new_demo and new_map splits");
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "actor checkpoint (default: <out>/train/checkpoint.bin)");
  auto* render = app.add_subcommand("render", "draw one rollout as SVG");
  std::string split = "seen";
  int index = 0;
  std::uint64_t episode_seed = 0;
  render->add_option("--checkpoint", checkpoint, "actor checkpoint (default: <out>/train/checkpoint.bin)");
  render->add_option("--split", split, "seen, new_demo or new_map")->check(CLI::IsMember({"seen", "new_demo", "new_map"}));
  render->add_option("--index", index, "task index within the split");
  render->add_option("--episode-seed", episode_seed, "obstacle stream seed");
  auto* check = app.add_subcommand("check", "gradient, oracle and ray-cast self-checks");
  CheckOptions check_opts;
  check->add_option("--ray-poses", check_opts.ray_poses, "poses in the ray-cast suite");
  check->add_option("--oracle-tasks", check_opts.oracle_tasks, "tasks in the oracle suite");
  check->add_option("--coordinates", check_opts.gradient_coordinates, "coordinates per gradient check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (check->parsed()) {
      if (!app.remaining(true).empty()) throw ConfigError("check takes no configuration overrides");
      return cmd_check(check_opts);
    }
    const RunConfig cfg = load_config(config_path, overrides_from(app.remaining(true)));
    const Layout out{cfg.resolved_out_dir()};
    if (checkpoint.empty()) checkpoint = out.checkpoint().string();
    if (gen_maps->parsed()) return cmd_gen_maps(cfg, out);
    if (gen_demos->parsed()) return cmd_gen_demos(cfg, out);
    if (train->parsed()) return cmd_train(cfg, out, resume);
    if (eval->parsed()) return cmd_eval(cfg, out, checkpoint);
    if (render->parsed()) return cmd_render(cfg, out, checkpoint, split, index, episode_seed);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const CheckFailure& e) {
    std::fprintf(stderr, "check failed: %s\n", e.what());
    return kCheckFailed;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kRuntime;
}
