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

#include <span>
#include <string>
#include <vector>

#include "itorl/autodiff.hpp"

namespace itorl {

enum class OptimizerKind { RMSprop, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::RMSprop;
  double lr = 5e-5;
  double rho = 0.99;    // RMSprop square-average decay
  double beta1 = 0.9;   // Adam
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; 0 disables.
  double max_grad_norm = 0.0;
};

/// First-order optimizer over a fixed parameter list. Reads `grad` from each
/// parameter, updates `value` and leaves gradients untouched.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(std::vector<ad::Parameter*> params, const OptimizerConfig& cfg);

  void step();
  void zero_grad();

  const OptimizerConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  long long steps() const { return t_; }

  /// Moment buffers in parameter order, for checkpointing.
  std::vector<ad::Matrix>& first_moments() { return m_; }
  std::vector<ad::Matrix>& second_moments() { return v_; }
  void set_steps(long long t) { t_ = t; }
  const std::vector<ad::Parameter*>& parameters() const { return params_; }

 private:
  std::vector<ad::Parameter*> params_;
  OptimizerConfig cfg_;
  std::vector<ad::Matrix> m_;
  std::vector<ad::Matrix> v_;
  long long t_ = 0;
};

}  // namespace itorl
