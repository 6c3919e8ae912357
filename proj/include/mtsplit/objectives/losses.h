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

#ifndef MTSPLIT_OBJECTIVES_LOSSES_H_
#define MTSPLIT_OBJECTIVES_LOSSES_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mtsplit/tensor.h"

namespace mtsplit::objectives {

inline constexpr std::int32_t kIgnoreLabel = -1;

// Mean softmax cross-entropy. Scores are (N, K) with labels (N), or
// (N, K, H, W) with labels (N, H, W). Pixels labelled ignore_label are
// skipped. Returns 0 when every position is ignored. grad, when given,
// receives d(loss)/d(scores).
double CrossEntropyLoss(const Tensor& scores, const LabelTensor& labels,
                        Tensor* grad = nullptr,
                        std::int32_t ignore_label = kIgnoreLabel);

// Per-pixel variant with a shape check on (N, K, H, W).
double SegmentationLoss(const Tensor& scores, const LabelTensor& labels,
                        Tensor* grad = nullptr,
                        std::int32_t ignore_label = kIgnoreLabel);

// Absolute depth error over pixels whose target is strictly positive.
struct DepthErrors {
  bool empty = true;  // no valid pixel; mae and rel are then 0
  std::size_t valid_pixels = 0;
  double mae = 0.0;
  double rel = 0.0;
};

// grad receives d(mae)/d(predicted); it is zero everywhere for an empty mask.
DepthErrors DepthLoss(const Tensor& predicted, const Tensor& target,
                      Tensor* grad = nullptr);

// Mean absolute error over all elements.
double L1Loss(const Tensor& predicted, const Tensor& target,
              Tensor* grad = nullptr);

enum class LossKind { kCrossEntropy, kMaskedL1, kL1 };

LossKind ParseLossKind(const std::string& name);
const char* LossKindName(LossKind kind);

// Dense targets travel as float tensors; class targets as labels.
struct TaskTarget {
  LabelTensor labels;
  Tensor values;
};

double TaskLoss(LossKind kind, const Tensor& predicted, const TaskTarget& target,
                Tensor* grad = nullptr);

struct LossWeights {
  double omega = 0.001;
  std::vector<double> per_task;  // empty means 1 for every task
};

void ValidateLossWeights(const LossWeights& w, std::size_t num_tasks);
double TaskWeight(const LossWeights& w, std::size_t task);

// Sum of weighted task losses plus omega times the task-privacy term.
double CombinedLoss(std::span<const double> task_losses, double tp_loss,
                    const LossWeights& w);

}  // namespace mtsplit::objectives

#endif  // MTSPLIT_OBJECTIVES_LOSSES_H_
