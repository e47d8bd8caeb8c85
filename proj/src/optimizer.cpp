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

#include "itorl/optimizer.hpp"

#include <cmath>

#include "itorl/errors.hpp"

namespace itorl {

Optimizer::Optimizer(std::vector<ad::Parameter*> params, const OptimizerConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg.lr > 0.0)) throw ConfigError("optimizer: learning rate must be positive");
  for (auto* p : params_) {
    m_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Optimizer::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void Optimizer::step() {
  double clip = 1.0;
  if (cfg_.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (auto* p : params_) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > cfg_.max_grad_norm) clip = cfg_.max_grad_norm / norm;
  }
  for (auto* p : params_) {
    if (!p->grad.allFinite()) throw NumericError("optimizer: non-finite gradient in " + p->name);
  }
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    const ad::Matrix g = clip * p.grad;
    if (cfg_.kind == OptimizerKind::RMSprop) {
      v_[i] = cfg_.rho * v_[i] + (1.0 - cfg_.rho) * g.cwiseProduct(g);
      p.value.array() -= cfg_.lr * g.array() / (v_[i].array().sqrt() + cfg_.eps);
    } else {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
      p.value.array() -= cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
    }
  }
}

}  // namespace itorl
