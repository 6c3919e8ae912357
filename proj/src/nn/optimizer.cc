// Copyright 2026 The mtsplit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mtsplit/nn/optimizer.h"

#include <cmath>

#include "mtsplit/error.h"

namespace mtsplit::nn {

Optimizer::Optimizer(std::vector<Parameter*> params, OptimizerConfig config)
    : params_(std::move(params)), config_(std::move(config)), lr_(config_.learning_rate) {
  Require(config_.kind == "adamw" || config_.kind == "sgd", ErrorKind::kConfig,
          "optimizer.kind must be 'adamw' or 'sgd', got '" + config_.kind + "'");
  Require(config_.learning_rate > 0.0 && std::isfinite(config_.learning_rate),
          ErrorKind::kConfig, "optimizer.learning_rate must be positive");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.size(), 0.0f);
    v_.emplace_back(config_.kind == "adamw" ? p->value.size() : 0, 0.0f);
  }
}

void Optimizer::SetEpoch(int epochs_completed) {
  if (config_.step_size <= 0) return;
  lr_ = config_.learning_rate *
        std::pow(config_.gamma, epochs_completed / config_.step_size);
}

void Optimizer::Step() {
  ++steps_;
  if (config_.kind == "sgd") {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& value = params_[i]->value;
      const Tensor& grad = params_[i]->grad;
      std::vector<float>& m = m_[i];
      for (std::size_t j = 0; j < value.size(); ++j) {
        float g = grad[j] + static_cast<float>(config_.weight_decay) * value[j];
        if (config_.momentum > 0.0) {
          m[j] = static_cast<float>(config_.momentum) * m[j] + g;
          g = m[j];
        }
        value[j] -= static_cast<float>(lr_) * g;
      }
    }
    return;
  }
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  const float b1 = static_cast<float>(config_.beta1);
  const float b2 = static_cast<float>(config_.beta2);
  const float step = static_cast<float>(lr_ / bias1);
  const float inv_sqrt_bias2 = static_cast<float>(1.0 / std::sqrt(bias2));
  const float eps = static_cast<float>(config_.eps);
  const float decay = static_cast<float>(1.0 - lr_ * config_.weight_decay);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& value = params_[i]->value;
    const Tensor& grad = params_[i]->grad;
    std::vector<float>& m = m_[i];
    std::vector<float>& v = v_[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const float g = grad[j];
      m[j] = b1 * m[j] + (1.0f - b1) * g;
      v[j] = b2 * v[j] + (1.0f - b2) * g * g;
      value[j] *= decay;
      value[j] -= step * m[j] / (std::sqrt(v[j]) * inv_sqrt_bias2 + eps);
    }
  }
}

}  // namespace mtsplit::nn
