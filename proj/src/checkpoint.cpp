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

#include <cmath>
#include <limits>

#include "itorl/errors.hpp"
#include "itorl/io.hpp"
#include "itorl/sac_trainer.hpp"

namespace itorl {

namespace {

Json optimizer_to_json(Optimizer& opt) {
  Json m = Json::array();
  Json v = Json::array();
  for (const auto& x : opt.first_moments()) m.push_back(matrix_to_json(x));
  for (const auto& x : opt.second_moments()) v.push_back(matrix_to_json(x));
  return {{"steps", opt.steps()}, {"m", m}, {"v", v}};
}

void optimizer_from_json(const Json& j, Optimizer& opt) {
  auto& m = opt.first_moments();
  auto& v = opt.second_moments();
  if (j.at("m").size() != m.size() || j.at("v").size() != v.size()) {
    throw InputError("checkpoint optimizer state does not match the model");
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = matrix_from_json(j["m"][i]);
    v[i] = matrix_from_json(j["v"][i]);
  }
  opt.set_steps(j.at("steps").get<long long>());
}

Json rng_to_json(const Rng& r) { return {r.state().key, r.state().counter}; }

Rng rng_from_json(const Json& j) { return Rng(Rng::State{j[0].get<std::uint64_t>(), j[1].get<std::uint64_t>()}); }

// NaN marks an absent split; JSON has no NaN, so store null.
Json maybe(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }
double unmaybe(const Json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

}  // namespace

void Trainer::save_checkpoint(const std::string& path) const {
  auto& self = const_cast<Trainer&>(*this);
  Json bank = Json::array();
  for (const auto& ring : bank_.rings()) {
    Json items = Json::array();
    for (const auto& t : ring.data) {
      items.push_back({t.s, {t.a.dx, t.a.dy}, t.r, t.s_next, t.done});
    }
    bank.push_back({{"head", ring.head}, {"inserted", ring.inserted}, {"items", items}});
  }
  Json metrics = Json::array();
  for (const auto& r : metrics_) {
    metrics.push_back({r.step, r.critic_loss, r.actor_loss, r.entropy_coef, maybe(r.success_seen),
                       maybe(r.success_new_demo), maybe(r.success_new_map)});
  }
  Json body = {
      {"model", model_config_to_json(in_.model)},
      {"obs",
       {{"n_rays", in_.env.obs.n_rays}, {"ray_len", in_.env.obs.ray_len},
        {"include_position", in_.env.obs.include_position}}},
      {"normalizer", normalizer_to_json(data_.norm)},
      {"tensors", tensors_to_json(self.params_->all_parameters())},
      {"optimizers",
       {{"critic", optimizer_to_json(self.critic_opt_)},
        {"actor", optimizer_to_json(self.actor_opt_)},
        {"alpha", optimizer_to_json(self.alpha_opt_)}}},
      {"rng", {{"rollout", rng_to_json(rollout_rng_)}, {"update", rng_to_json(update_rng_)}}},
      {"counters",
       {{"env_steps", env_steps_}, {"updates", updates_}, {"episodes", episodes_}, {"next_eval", next_eval_},
        {"next_checkpoint", next_checkpoint_}, {"loss_sum_critic", loss_sum_critic_},
        {"loss_sum_actor", loss_sum_actor_}, {"loss_count", loss_count_}}},
      {"seed", in_.train.seed},
      {"n_demos", data_.prepared.size()},
      {"bank", {{"per_buffer", bank_.capacity_per_buffer()}, {"rings", bank}}},
      {"metrics", metrics},
  };
  write_checkpoint_file(path, body);
}

void Trainer::load_checkpoint(const std::string& path) {
  const Json j = read_checkpoint_file(path);
  if (j.at("n_demos").get<std::size_t>() != data_.prepared.size()) {
    throw InputError(path + ": checkpoint was written for a different training set");
  }
  if (model_config_to_json(in_.model) != j.at("model")) throw InputError(path + ": model configuration differs");
  tensors_from_json(j.at("tensors"), params_->all_parameters());
  optimizer_from_json(j.at("optimizers").at("critic"), critic_opt_);
  optimizer_from_json(j.at("optimizers").at("actor"), actor_opt_);
  optimizer_from_json(j.at("optimizers").at("alpha"), alpha_opt_);
  rollout_rng_ = rng_from_json(j.at("rng").at("rollout"));
  update_rng_ = rng_from_json(j.at("rng").at("update"));
  const auto& c = j.at("counters");
  env_steps_ = c.at("env_steps").get<long long>();
  updates_ = c.at("updates").get<long long>();
  episodes_ = c.at("episodes").get<long long>();
  next_eval_ = c.at("next_eval").get<long long>();
  next_checkpoint_ = c.at("next_checkpoint").get<long long>();
  loss_sum_critic_ = c.at("loss_sum_critic").get<double>();
  loss_sum_actor_ = c.at("loss_sum_actor").get<double>();
  loss_count_ = c.at("loss_count").get<long long>();
  std::vector<ReplayBank::Ring> rings;
  int demo = 0;
  for (const auto& rj : j.at("bank").at("rings")) {
    ReplayBank::Ring ring;
    ring.head = rj.at("head").get<std::size_t>();
    ring.inserted = rj.at("inserted").get<std::uint64_t>();
    for (const auto& t : rj.at("items")) {
      Transition tr;
      tr.s = t[0].get<std::vector<double>>();
      tr.a = {t[1][0].get<double>(), t[1][1].get<double>()};
      tr.r = t[2].get<double>();
      tr.s_next = t[3].get<std::vector<double>>();
      tr.done = t[4].get<bool>();
      tr.demo = demo;
      ring.data.push_back(std::move(tr));
    }
    rings.push_back(std::move(ring));
    ++demo;
  }
  bank_.restore(j.at("bank").at("per_buffer").get<std::size_t>(), std::move(rings));
  metrics_.clear();
  for (const auto& r : j.at("metrics")) {
    metrics_.push_back({r[0].get<long long>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>(),
                        unmaybe(r[4]), unmaybe(r[5]), unmaybe(r[6])});
  }
}

}  // namespace itorl
