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

#include "itorl/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "itorl/errors.hpp"

namespace itorl {

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

Json vec(Vec2 v) { return Json::array({v.x, v.y}); }

Vec2 to_vec(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw InputError("expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw InputError(std::string("missing field '") + key + "'");
  return j.at(key).get<T>();
}

}  // namespace

Json map_to_json(const MazeMap& map) {
  Json walls = Json::array();
  for (const auto& w : map.walls()) walls.push_back({w.a.x, w.a.y, w.b.x, w.b.y});
  return {{"map_id", map.map_id()}, {"seed", map.seed()},         {"grid_size", map.grid_size()},
          {"path_width", map.path_width()}, {"walls", walls}, {"start", vec(map.start())}};
}

MazeMap map_from_json(const Json& j) {
  std::vector<Segment> walls;
  for (const auto& w : field<Json>(j, "walls")) {
    if (!w.is_array() || w.size() != 4) throw InputError("wall must be [x1, y1, x2, y2]");
    walls.push_back({{w[0].get<double>(), w[1].get<double>()}, {w[2].get<double>(), w[3].get<double>()}});
  }
  return MazeMap(field<std::string>(j, "map_id"), field<std::uint64_t>(j, "seed"), field<int>(j, "grid_size"),
                 field<int>(j, "path_width"), std::move(walls), to_vec(field<Json>(j, "start")));
}

void write_map(const std::string& path, const MazeMap& map) { write_file_atomic(path, map_to_json(map).dump(1) + "\n"); }

MazeMap read_map(const std::string& path) {
  try {
    return map_from_json(Json::parse(read_file(path)));
  } catch (const Json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

Json demo_to_json(const Demonstration& d) {
  Json pairs = Json::array();
  for (const auto& p : d.pairs) {
    pairs.push_back({{"s", {{"pos", vec(p.state.position)}, {"view", p.state.local_view}}},
                     {"a", {p.action.dx, p.action.dy}}});
  }
  return {{"demo_id", d.demo_id}, {"map_id", d.map_id},           {"goal", vec(d.goal)},
          {"goal_radius", d.goal_radius}, {"pairs", pairs}};
}

Demonstration demo_from_json(const Json& j) {
  Demonstration d;
  d.demo_id = field<std::string>(j, "demo_id");
  d.map_id = field<std::string>(j, "map_id");
  d.goal = to_vec(field<Json>(j, "goal"));
  d.goal_radius = field<double>(j, "goal_radius");
  int t = 0;
  for (const auto& p : field<Json>(j, "pairs")) {
    DemoPair pair;
    pair.state.position = to_vec(p.at("s").at("pos"));
    pair.state.local_view = p.at("s").at("view").get<std::vector<double>>();
    pair.state.t = t++;
    const Vec2 a = to_vec(p.at("a"));
    pair.action = {a.x, a.y};
    d.pairs.push_back(std::move(pair));
  }
  if (d.pairs.empty()) throw InputError("demo " + d.demo_id + " has no pairs");
  return d;
}

std::string demos_to_jsonl(const std::vector<Demonstration>& demos) {
  std::string out;
  for (const auto& d : demos) out += demo_to_json(d).dump() + "\n";
  return out;
}

std::vector<Demonstration> read_demos_jsonl(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<Demonstration> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(demo_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      throw InputError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

Json normalizer_to_json(const Normalizer& n) {
  return {{"state_mean", n.state_mean},
          {"state_scale", n.state_scale},
          {"action_mean", n.action_mean},
          {"action_scale", n.action_scale}};
}

Normalizer normalizer_from_json(const Json& j) {
  Normalizer n;
  n.state_mean = field<std::vector<double>>(j, "state_mean");
  n.state_scale = field<std::vector<double>>(j, "state_scale");
  n.action_mean = field<std::vector<double>>(j, "action_mean");
  n.action_scale = field<std::vector<double>>(j, "action_scale");
  return n;
}

Json model_config_to_json(const ModelConfig& c) {
  return {{"d_model", c.d_model},
          {"n_heads", c.n_heads},
          {"hidden", c.hidden},
          {"actor_encoder_layers", c.actor_encoder_layers},
          {"actor_attention_layers", c.actor_attention_layers},
          {"critic_encoder_layers", c.critic_encoder_layers},
          {"critic_attention_layers", c.critic_attention_layers},
          {"dropout", c.dropout},
          {"positional_encoding", c.positional_encoding},
          {"context", c.context == ContextMode::Attention ? "attention" : "mean_pool"},
          {"log_std_min", c.log_std_min},
          {"log_std_max", c.log_std_max}};
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  c.d_model = field<int>(j, "d_model");
  c.n_heads = field<int>(j, "n_heads");
  c.hidden = field<int>(j, "hidden");
  c.actor_encoder_layers = field<int>(j, "actor_encoder_layers");
  c.actor_attention_layers = field<int>(j, "actor_attention_layers");
  c.critic_encoder_layers = field<int>(j, "critic_encoder_layers");
  c.critic_attention_layers = field<int>(j, "critic_attention_layers");
  c.dropout = field<double>(j, "dropout");
  c.positional_encoding = field<bool>(j, "positional_encoding");
  const auto ctx = field<std::string>(j, "context");
  if (ctx == "attention") {
    c.context = ContextMode::Attention;
  } else if (ctx == "mean_pool") {
    c.context = ContextMode::MeanPool;
  } else {
    throw ConfigError("model.context must be 'attention' or 'mean_pool'");
  }
  c.log_std_min = field<double>(j, "log_std_min");
  c.log_std_max = field<double>(j, "log_std_max");
  c.validate();
  return c;
}

Json matrix_to_json(const Matrix& m) {
  return {{"shape", {m.rows(), m.cols()}}, {"values", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const Json& j) {
  const auto shape = field<std::vector<Eigen::Index>>(j, "shape");
  const auto values = field<std::vector<double>>(j, "values");
  if (shape.size() != 2 || shape[0] * shape[1] != static_cast<Eigen::Index>(values.size())) {
    throw InputError("tensor shape does not match its values");
  }
  Matrix m(shape[0], shape[1]);
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

Json tensors_to_json(const std::vector<Parameter*>& params) {
  Json out = Json::object();
  for (const auto* p : params) out[p->name] = matrix_to_json(p->value);
  return out;
}

void tensors_from_json(const Json& j, const std::vector<Parameter*>& params) {
  for (auto* p : params) {
    if (!j.contains(p->name)) throw InputError("checkpoint lacks tensor " + p->name);
    Matrix m = matrix_from_json(j.at(p->name));
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw ShapeError("checkpoint tensor " + p->name + " has the wrong shape");
    }
    p->value = std::move(m);
  }
}

void write_checkpoint_file(const std::string& path, const Json& body) {
  Json wrapped = body;
  wrapped["format"] = kCheckpointFormat;
  const auto bytes = Json::to_cbor(wrapped);
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

Json read_checkpoint_file(const std::string& path) {
  const std::string bytes = read_file(path);
  Json j;
  try {
    j = Json::from_cbor(bytes);
  } catch (const Json::exception& e) {
    throw InputError(path + ": not a checkpoint (" + e.what() + ")");
  }
  if (!j.contains("format") || j["format"] != kCheckpointFormat) {
    throw InputError(path + ": unsupported checkpoint format");
  }
  return j;
}

LoadedModel load_model(const std::string& checkpoint_path) {
  const Json j = read_checkpoint_file(checkpoint_path);
  LoadedModel m;
  m.model = model_config_from_json(j.at("model"));
  m.obs.n_rays = j.at("obs").at("n_rays").get<int>();
  m.obs.ray_len = j.at("obs").at("ray_len").get<double>();
  m.obs.include_position = j.at("obs").at("include_position").get<bool>();
  m.norm = normalizer_from_json(j.at("normalizer"));
  m.params = std::make_unique<ModelParams>(m.model, m.obs.dim(), 0);
  tensors_from_json(j.at("tensors"), m.params->all_parameters());
  return m;
}

}  // namespace itorl
