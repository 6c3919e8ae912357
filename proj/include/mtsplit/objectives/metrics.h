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

#ifndef MTSPLIT_OBJECTIVES_METRICS_H_
#define MTSPLIT_OBJECTIVES_METRICS_H_

#include <map>
#include <string>
#include <vector>

#include "mtsplit/objectives/losses.h"
#include "mtsplit/tensor.h"

namespace mtsplit::objectives {

struct SegmentationScores {
  double miou = 0.0;
  double pixel_accuracy = 0.0;
};

// IoU is averaged over the classes that occur in the target.
SegmentationScores SegmentationMetrics(const LabelTensor& predicted,
                                       const LabelTensor& target,
                                       int num_classes,
                                       std::int32_t ignore_label = kIgnoreLabel);

struct NormalScores {
  double mean_degrees = 0.0;
  double median_degrees = 0.0;
  double within_11_25 = 0.0;
  double within_22_5 = 0.0;
  double within_30 = 0.0;
};

// Maps are (N, 3, H, W) with unit vectors per pixel.
NormalScores SurfaceNormalMetrics(const Tensor& predicted, const Tensor& target,
                                  double unit_tolerance = 1e-3);

// Argmax over dimension 1: (N, K) -> (N), (N, K, H, W) -> (N, H, W).
LabelTensor ArgMax(const Tensor& scores);

// Fraction of equal entries, ignoring ignore_label in the target.
double Accuracy(const LabelTensor& predicted, const LabelTensor& target,
                std::int32_t ignore_label = kIgnoreLabel);

struct EvaluationPolicy {
  double target_accuracy = 0.9;
  // Metric names keyed by task id; tasks not listed use their default metric.
  std::map<std::string, std::vector<std::string>> metrics;
};

void ValidateEvaluationPolicy(const EvaluationPolicy& p);

}  // namespace mtsplit::objectives

#endif  // MTSPLIT_OBJECTIVES_METRICS_H_
