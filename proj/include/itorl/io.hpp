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

#include <string>
#include <vector>

#include <json.hpp>

#include "itorl/da_net.hpp"
#include "itorl/demo_gen.hpp"
#include "itorl/imitator_reward.hpp"
#include "itorl/maze_env.hpp"

namespace itorl {

using Json = nlohmann::json;

/// Writes through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

Json map_to_json(const MazeMap& map);
MazeMap map_from_json(const Json& j);
void write_map(const std::string& path, const MazeMap& map);
MazeMap read_map(const std::string& path);

Json demo_to_json(const Demonstration& d);
Demonstration demo_from_json(const Json& j);
std::string demos_to_jsonl(const std::vector<Demonstration>& demos);
std::vector<Demonstration> read_demos_jsonl(const std::string& path);

Json normalizer_to_json(const Normalizer& n);
Normalizer normalizer_from_json(const Json& j);

Json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

/// name -> {shape, values} for every listed parameter.
Json tensors_to_json(const std::vector<Parameter*>& params);
/// Fills the listed parameters; names and shapes must match exactly.
void tensors_from_json(const Json& j, const std::vector<Parameter*>& params);
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

inline constexpr const char* kCheckpointFormat = "itorl-checkpoint/1";

/// Binary (CBOR) container with a format tag.
void write_checkpoint_file(const std::string& path, const Json& body);
Json read_checkpoint_file(const std::string& path);

/// Policy-only view of a checkpoint: what evaluation needs.
struct LoadedModel {
  ModelConfig model;
  ObservationConfig obs;
  Normalizer norm;
  std::unique_ptr<ModelParams> params;
};
LoadedModel load_model(const std::string& checkpoint_path);

}  // namespace itorl
