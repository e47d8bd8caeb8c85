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
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "itorl/da_net.hpp"
#include "itorl/eval_harness.hpp"
#include "itorl/io.hpp"
#include "itorl/sac_trainer.hpp"

namespace itorl {

inline constexpr int kConfigVersion = 1;

struct DatasetConfig {
  int grid_size = 12;
  int path_width = 2;
  int n_maps = 1;
  int held_out_maps = 0;
  std::uint64_t map_seed = 0;
  int per_map = 300;
  double train_fraction = 0.9;
  int train_per_map = 0;
  std::uint64_t demo_seed = 0;
  std::uint64_t split_seed = 0;
  double max_step = 0.8;
  int min_goal_cells = 4;
  bool replay_audit = true;
};

struct EvalConfig {
  int episodes = 100;
  std::uint64_t seed = 0;
  std::vector<double> offsets{0.0, 0.5, 1.0, 2.0, 3.0};
  int attention_rollouts = 20;
  int attention_band = 5;
  /// "actor", "oracle", "immobile" or "random".
  std::string policy = "actor";
};

/// Everything one run needs. Defaults are the shipped hyperparameters.
struct RunConfig {
  int version = kConfigVersion;
  /// Relative to $ITORL_OUT when that is set.
  std::string out_dir = "runs/default";
  EnvSettings env;
  DatasetConfig dataset;
  ModelConfig model;
  TrainerConfig train;
  EvalConfig eval;

  void validate() const;
  /// out_dir joined onto $ITORL_OUT (if set and out_dir is relative).
  std::string resolved_out_dir() const;
};

Json config_to_json(const RunConfig& c);
/// Strict: every key must be known and every value of the right type.
RunConfig config_from_json(const Json& j);

/// Reads `path` (empty: defaults) and applies "section.key=value" overrides.
/// Values parse as JSON when possible and as bare strings otherwise.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Maze seeds are dataset.map_seed + i; the last held_out_maps are held out.
std::vector<std::shared_ptr<const MazeMap>> make_maps(const DatasetConfig& d);
std::set<std::string> held_out_ids(const DatasetConfig& d,
                                   const std::vector<std::shared_ptr<const MazeMap>>& maps);
DemoGenConfig demo_gen_config(const RunConfig& c);
/// per_map demos on every map (stream split by map id), then split_dataset.
DatasetSplit make_dataset(const RunConfig& c, const std::vector<std::shared_ptr<const MazeMap>>& maps,
                          const std::set<std::string>& held_out);
/// TaskSet over `demos`, with every referenced map.
TaskSet make_task_set(std::vector<Demonstration> demos, const std::vector<std::shared_ptr<const MazeMap>>& maps);

}  // namespace itorl
