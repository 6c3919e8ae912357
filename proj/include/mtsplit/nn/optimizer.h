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

#ifndef MTSPLIT_NN_OPTIMIZER_H_
#define MTSPLIT_NN_OPTIMIZER_H_

#include <string>
#include <vector>

#include "mtsplit/nn/module.h"

namespace mtsplit::nn {

struct OptimizerConfig {
  std::string kind = "adamw";  // "adamw" or "sgd"
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double momentum = 0.0;  // sgd only
  // Step decay: lr *= gamma every step_size epochs; 0 disables.
  int step_size = 0;
  double gamma = 0.5;
};

// Decoupled-weight-decay Adam, or SGD with optional momentum. Reads each
// parameter's grad and updates its value; does not zero gradients.
class Optimizer {
 public:
  Optimizer(std::vector<Parameter*> params, OptimizerConfig config);

  void Step();
  // Applies the step-decay schedule for the given completed epoch count.
  void SetEpoch(int epochs_completed);
  double learning_rate() const { return lr_; }
  long steps() const { return steps_; }
  const std::vector<Parameter*>& params() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  OptimizerConfig config_;
  double lr_;
  long steps_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

}  // namespace mtsplit::nn

#endif  // MTSPLIT_NN_OPTIMIZER_H_
