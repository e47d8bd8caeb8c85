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


#include "itorl/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>

#include "itorl/errors.hpp"

namespace itorl {

namespace {

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<OptimizerKind> kOptimizers[] = {{OptimizerKind::RMSprop, "rmsprop"}, {OptimizerKind::Adam, "adam"}};
constexpr EnumName<EntropyMode> kEntropyModes[] = {{EntropyMode::Auto, "auto"}, {EntropyMode::Fixed, "fixed"}};
constexpr EnumName<RewardMode> kRewardModes[] = {{RewardMode::Itor, "itor"}, {RewardMode::EndingOnly, "ending_only"}};
constexpr EnumName<AlphaMode> kAlphaModes[] = {{AlphaMode::Table, "table"}, {AlphaMode::Formula, "formula"}};

template <typename E, std::size_t N>
const char* enum_name(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "?";
}

template <typename E, std::size_t N>
E enum_value(const EnumName<E> (&table)[N], const std::string& s, const char* key) {
  for (const auto& e : table) {
    if (s == e.name) return e.value;
  }
  std::string allowed;
  for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ", ") + e.name;
  throw ConfigError(std::string(key) + ": '" + s + "' is not one of " + allowed);
}

int line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

std::string where(const std::string& source, const std::string& text, const std::string& key) {
  if (source.empty()) return "";
  const auto pos = text.find('"' + key + '"');
  if (pos == std::string::npos) return source + ": ";
  return source + ":" + std::to_string(line_of(text, pos)) + ": ";
}

bool same_kind(const Json& base, const Json& v) {
  if (base.is_boolean()) return v.is_boolean();
  if (base.is_string()) return v.is_string();
  if (base.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  if (base.is_number_integer()) return v.is_number_integer();
  if (base.is_number()) return v.is_number();
  if (base.is_array()) {
    return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_number(); });
  }
  return false;
}

// Overlays `user` onto the defaults, rejecting unknown keys and type changes.
void overlay(Json& base, const Json& user, const std::string& path, const std::string& source,
             const std::string& text) {
  if (!user.is_object()) throw ConfigError(where(source, text, "") + (path.empty() ? "config" : path) + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError(where(source, text, key) + "unknown key '" + full + "'");
    Json& slot = base[key];
    if (slot.is_object()) {
      overlay(slot, value, full, source, text);
      continue;
    }
    if (!same_kind(slot, value)) {
      throw ConfigError(where(source, text, key) + "'" + full + "' expects " + slot.type_name() + ", got " +
                        value.type_name());
    }
    slot = slot.is_number_float() ? Json(value.get<double>()) : value;
  }
}

}  // namespace

Json config_to_json(const RunConfig& c) {
  const auto& e = c.env;
  const auto& d = c.dataset;
  const auto& t = c.train;
  return {
      {"version", c.version},
      {"out_dir", c.out_dir},
      {"env",
       {{"n_rays", e.obs.n_rays},
        {"ray_len", e.obs.ray_len},
        {"coordinates", e.obs.include_position},
        {"obstacles", e.obstacles},
        {"obstacle_prob", e.obstacle_prob},
        {"max_obstacles", e.max_obstacles},
        {"horizon", e.horizon},
        {"goal_radius", e.goal_radius},
        {"ending_c", e.ending_c},
        {"disturbance", e.reset.disturbance},
        {"max_retries", e.reset.max_retries}}},
      {"dataset",
       {{"grid_size", d.grid_size},
        {"path_width", d.path_width},
        {"n_maps", d.n_maps},
        {"held_out_maps", d.held_out_maps},
        {"map_seed", d.map_seed},
        {"per_map", d.per_map},
        {"train_fraction", d.train_fraction},
        {"train_per_map", d.train_per_map},
        {"demo_seed", d.demo_seed},
        {"split_seed", d.split_seed},
        {"max_step", d.max_step},
        {"min_goal_cells", d.min_goal_cells},
        {"replay_audit", d.replay_audit}}},
      {"model", model_config_to_json(c.model)},
      {"train",
       {{"optimizer", enum_name(kOptimizers, t.optimizer.kind)},
        {"lr", t.optimizer.lr},
        {"rho", t.optimizer.rho},
        {"beta1", t.optimizer.beta1},
        {"beta2", t.optimizer.beta2},
        {"eps", t.optimizer.eps},
        {"max_grad_norm", t.optimizer.max_grad_norm},
        {"batch", t.batch},
        {"buffers_per_batch", t.buffers_per_batch},
        {"demo_injection", t.demo_injection},
        {"polyak", t.polyak},
        {"entropy_mode", enum_name(kEntropyModes, t.entropy_mode)},
        {"entropy_coef", t.entropy_coef},
        {"target_entropy", t.target_entropy},
        {"total_env_steps", t.total_env_steps},
        {"warmup_steps", t.warmup_steps},
        {"utd", t.utd},
        {"eval_every", t.eval_every},
        {"eval_episodes", t.eval_episodes},
        {"checkpoint_every", t.checkpoint_every},
        {"buffer_capacity", t.buffer_capacity},
        {"reward_mode", enum_name(kRewardModes, t.reward_mode)},
        {"eta", t.reward.eta},
        {"alpha", t.reward.alpha},
        {"alpha_mode", enum_name(kAlphaModes, t.reward.alpha_mode)},
        {"gamma", t.reward.gamma},
        {"behavior_cloning", t.behavior_cloning},
        {"bc_updates", t.bc_updates},
        {"seed", t.seed}}},
      {"eval",
       {{"episodes", c.eval.episodes},
        {"seed", c.eval.seed},
        {"offsets", c.eval.offsets},
        {"attention_rollouts", c.eval.attention_rollouts},
        {"attention_band", c.eval.attention_band},
        {"policy", c.eval.policy}}},
  };
}

RunConfig config_from_json(const Json& in) {
  Json j = config_to_json(RunConfig{});
  overlay(j, in, "", "", "");
  if (j.at("version").get<int>() != kConfigVersion) {
    throw ConfigError("unsupported config version " + j.at("version").dump());
  }
  RunConfig c;
  c.out_dir = j.at("out_dir").get<std::string>();
  const auto& e = j.at("env");
  c.env.obs.n_rays = e.at("n_rays").get<int>();
  c.env.obs.ray_len = e.at("ray_len").get<double>();
  c.env.obs.include_position = e.at("coordinates").get<bool>();
  c.env.obstacles = e.at("obstacles").get<bool>();
  c.env.obstacle_prob = e.at("obstacle_prob").get<double>();
  c.env.max_obstacles = e.at("max_obstacles").get<int>();
  c.env.horizon = e.at("horizon").get<int>();
  c.env.goal_radius = e.at("goal_radius").get<double>();
  c.env.ending_c = e.at("ending_c").get<double>();
  c.env.reset.disturbance = e.at("disturbance").get<double>();
  c.env.reset.max_retries = e.at("max_retries").get<int>();
  const auto& d = j.at("dataset");
  c.dataset.grid_size = d.at("grid_size").get<int>();
  c.dataset.path_width = d.at("path_width").get<int>();
  c.dataset.n_maps = d.at("n_maps").get<int>();
  c.dataset.held_out_maps = d.at("held_out_maps").get<int>();
  c.dataset.map_seed = d.at("map_seed").get<std::uint64_t>();
  c.dataset.per_map = d.at("per_map").get<int>();
  c.dataset.train_fraction = d.at("train_fraction").get<double>();
  c.dataset.train_per_map = d.at("train_per_map").get<int>();
  c.dataset.demo_seed = d.at("demo_seed").get<std::uint64_t>();
  c.dataset.split_seed = d.at("split_seed").get<std::uint64_t>();
  c.dataset.max_step = d.at("max_step").get<double>();
  c.dataset.min_goal_cells = d.at("min_goal_cells").get<int>();
  c.dataset.replay_audit = d.at("replay_audit").get<bool>();
  c.model = model_config_from_json(j.at("model"));
  const auto& t = j.at("train");
  c.train.optimizer.kind = enum_value(kOptimizers, t.at("optimizer").get<std::string>(), "train.optimizer");
  c.train.optimizer.lr = t.at("lr").get<double>();
  c.train.optimizer.rho = t.at("rho").get<double>();
  c.train.optimizer.beta1 = t.at("beta1").get<double>();
  c.train.optimizer.beta2 = t.at("beta2").get<double>();
  c.train.optimizer.eps = t.at("eps").get<double>();
  c.train.optimizer.max_grad_norm = t.at("max_grad_norm").get<double>();
  c.train.batch = t.at("batch").get<int>();
  c.train.buffers_per_batch = t.at("buffers_per_batch").get<int>();
  c.train.demo_injection = t.at("demo_injection").get<double>();
  c.train.polyak = t.at("polyak").get<double>();
  c.train.entropy_mode = enum_value(kEntropyModes, t.at("entropy_mode").get<std::string>(), "train.entropy_mode");
  c.train.entropy_coef = t.at("entropy_coef").get<double>();
  c.train.target_entropy = t.at("target_entropy").get<double>();
  c.train.total_env_steps = t.at("total_env_steps").get<long long>();
  c.train.warmup_steps = t.at("warmup_steps").get<long long>();
  c.train.utd = t.at("utd").get<double>();
  c.train.eval_every = t.at("eval_every").get<long long>();
  c.train.eval_episodes = t.at("eval_episodes").get<int>();
  c.train.checkpoint_every = t.at("checkpoint_every").get<long long>();
  c.train.buffer_capacity = t.at("buffer_capacity").get<std::size_t>();
  c.train.reward_mode = enum_value(kRewardModes, t.at("reward_mode").get<std::string>(), "train.reward_mode");
  c.train.reward.eta = t.at("eta").get<double>();
  c.train.reward.alpha = t.at("alpha").get<double>();
  c.train.reward.alpha_mode = enum_value(kAlphaModes, t.at("alpha_mode").get<std::string>(), "train.alpha_mode");
  c.train.reward.gamma = t.at("gamma").get<double>();
  // One ending magnitude for the environment and the reward.
  c.train.reward.c = c.env.ending_c;
  c.train.behavior_cloning = t.at("behavior_cloning").get<bool>();
  c.train.bc_updates = t.at("bc_updates").get<long long>();
  c.train.seed = t.at("seed").get<std::uint64_t>();
  const auto& v = j.at("eval");
  c.eval.episodes = v.at("episodes").get<int>();
  c.eval.seed = v.at("seed").get<std::uint64_t>();
  c.eval.offsets = v.at("offsets").get<std::vector<double>>();
  c.eval.attention_rollouts = v.at("attention_rollouts").get<int>();
  c.eval.attention_band = v.at("attention_band").get<int>();
  c.eval.policy = v.at("policy").get<std::string>();
  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (env.obs.n_rays <= 0 || !(env.obs.ray_len > 0.0)) throw ConfigError("env: rays need a positive count and length");
  if (!(env.obstacle_prob >= 0.0 && env.obstacle_prob <= 1.0)) throw ConfigError("env.obstacle_prob must lie in [0, 1]");
  if (env.max_obstacles < 0) throw ConfigError("env.max_obstacles must be non-negative");
  if (env.horizon <= 0) throw ConfigError("env.horizon must be positive");
  if (!(env.goal_radius > 0.0)) throw ConfigError("env.goal_radius must be positive");
  if (!(env.reset.disturbance >= 0.0)) throw ConfigError("env.disturbance must be non-negative");
  if (env.reset.max_retries < 1) throw ConfigError("env.max_retries must be at least 1");
  if (dataset.path_width <= 0 || dataset.grid_size % (2 * dataset.path_width) != 0 ||
      dataset.grid_size < 2 * dataset.path_width) {
    throw ConfigError("dataset.grid_size must be a positive multiple of 2 * path_width");
  }
  if (dataset.n_maps <= 0) throw ConfigError("dataset.n_maps must be positive");
  if (dataset.held_out_maps < 0 || dataset.held_out_maps >= dataset.n_maps) {
    throw ConfigError("dataset.held_out_maps must leave at least one training map");
  }
  if (dataset.per_map <= 0) throw ConfigError("dataset.per_map must be positive");
  if (!(dataset.train_fraction > 0.0 && dataset.train_fraction < 1.0)) {
    throw ConfigError("dataset.train_fraction must lie in (0, 1)");
  }
  if (dataset.train_per_map < 0) throw ConfigError("dataset.train_per_map must be non-negative");
  if (!(dataset.max_step > 0.0 && dataset.max_step <= 1.0)) throw ConfigError("dataset.max_step must lie in (0, 1]");
  if (eval.episodes < 0 || eval.attention_rollouts < 0 || eval.attention_band < 0) {
    throw ConfigError("eval: counts must be non-negative");
  }
  if (std::any_of(eval.offsets.begin(), eval.offsets.end(), [](double o) { return !(o >= 0.0); })) {
    throw ConfigError("eval.offsets must be non-negative");
  }
  const std::string p = eval.policy;
  if (p != "actor" && p != "oracle" && p != "immobile" && p != "random") {
    throw ConfigError("eval.policy must be actor, oracle, immobile or random");
  }
  model.validate();
  train.validate();
  train.reward.validate();
}

std::string RunConfig::resolved_out_dir() const {
  const std::filesystem::path dir(out_dir);
  const char* root = std::getenv("ITORL_OUT");
  if (root == nullptr || *root == '\0' || dir.is_absolute()) return dir.string();
  return (std::filesystem::path(root) / dir).string();
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  Json j = config_to_json(RunConfig{});
  if (!path.empty()) {
    const std::string text = read_file(path);
    Json user;
    try {
      user = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ConfigError(path + ":" + std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                        ": malformed JSON (" + e.what() + ")");
    }
    overlay(j, user, "", path, text);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' must look like key=value");
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    Json value;
    try {
      value = Json::parse(raw);
    } catch (const Json::parse_error&) {
      value = raw;
    }
    // Build {"a": {"b": value}} for "a.b" and overlay it.
    Json patch = value;
    std::string rest = key;
    std::vector<std::string> parts;
    for (std::size_t dot; (dot = rest.find('.')) != std::string::npos; rest = rest.substr(dot + 1)) {
      parts.push_back(rest.substr(0, dot));
    }
    parts.push_back(rest);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
    try {
      overlay(j, patch, "", "", "");
    } catch (const ConfigError& e) {
      throw ConfigError("override '" + o + "': " + e.what());
    }
  }
  return config_from_json(j);
}

std::vector<std::shared_ptr<const MazeMap>> make_maps(const DatasetConfig& d) {
  std::vector<std::shared_ptr<const MazeMap>> maps;
  for (int i = 0; i < d.n_maps; ++i) {
    maps.push_back(std::make_shared<const MazeMap>(
        generate_maze(d.map_seed + static_cast<std::uint64_t>(i), d.grid_size, d.path_width)));
  }
  return maps;
}

std::set<std::string> held_out_ids(const DatasetConfig& d, const std::vector<std::shared_ptr<const MazeMap>>& maps) {
  std::set<std::string> out;
  for (std::size_t i = maps.size() - static_cast<std::size_t>(std::min<int>(d.held_out_maps, static_cast<int>(maps.size())));
       i < maps.size(); ++i) {
    out.insert(maps[i]->map_id());
  }
  return out;
}

DemoGenConfig demo_gen_config(const RunConfig& c) {
  DemoGenConfig gen;
  gen.max_step = c.dataset.max_step;
  gen.min_goal_cells = c.dataset.min_goal_cells;
  gen.options.goal_radius = c.env.goal_radius;
  gen.options.horizon = c.env.horizon;
  gen.options.obs = c.env.obs;
  return gen;
}

DatasetSplit make_dataset(const RunConfig& c, const std::vector<std::shared_ptr<const MazeMap>>& maps,
                          const std::set<std::string>& held_out) {
  const DemoGenConfig gen = demo_gen_config(c);
  std::vector<Demonstration> all;
  for (const auto& map : maps) {
    for (auto& demo : generate_demos(*map, c.dataset.per_map, Rng(c.dataset.demo_seed).split(map->map_id()), gen)) {
      all.push_back(std::move(demo));
    }
  }
  SplitRule rule;
  rule.train_fraction = c.dataset.train_fraction;
  rule.train_per_map = c.dataset.train_per_map;
  return split_dataset(all, rule, held_out, c.dataset.split_seed);
}

TaskSet make_task_set(std::vector<Demonstration> demos, const std::vector<std::shared_ptr<const MazeMap>>& maps) {
  TaskSet ts;
  ts.demos = std::move(demos);
  for (const auto& d : ts.demos) {
    const auto it = std::find_if(maps.begin(), maps.end(), [&](const auto& m) { return m->map_id() == d.map_id; });
    if (it == maps.end()) throw InputError("demo " + d.demo_id + " refers to unknown map " + d.map_id);
    ts.add_map(*it);
  }
  return ts;
}

}  // namespace itorl
