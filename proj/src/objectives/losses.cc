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

#include "mtsplit/objectives/losses.h"

#include <cmath>

#include "mtsplit/error.h"

namespace mtsplit::objectives {

double CrossEntropyLoss(const Tensor& scores, const LabelTensor& labels,
                        Tensor* grad, std::int32_t ignore_label) {
  Require(scores.ndim() == 2 || scores.ndim() == 4, ErrorKind::kConfig,
          "cross-entropy scores must be (N, K) or (N, K, H, W), got " +
              ShapeToString(scores.shape()));
  const int n = scores.dim(0), k = scores.dim(1);
  const int h = scores.ndim() == 4 ? scores.dim(2) : 1;
  const int w = scores.ndim() == 4 ? scores.dim(3) : 1;
  Shape expect = scores.ndim() == 4 ? Shape{n, h, w} : Shape{n};
  Require(labels.shape == expect, ErrorKind::kConfig,
          "labels " + ShapeToString(labels.shape) + " do not match scores " +
              ShapeToString(scores.shape()));
  if (grad) *grad = Tensor(scores.shape());
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> p(static_cast<std::size_t>(k));
  for (int s = 0; s < n; ++s) {
    for (std::size_t q = 0; q < plane; ++q) {
      const std::int32_t y = labels.values[s * plane + q];
      if (y == ignore_label) continue;
      if (y < 0 || y >= k) {
        const int row = static_cast<int>(q / w), col = static_cast<int>(q % w);
        Fail(ErrorKind::kData,
             "label " + std::to_string(y) + " outside [0, " + std::to_string(k) +
                 ") at sample " + std::to_string(s) +
                 (scores.ndim() == 4 ? ", pixel (" + std::to_string(row) + ", " +
                                           std::to_string(col) + ")"
                                     : std::string()));
      }
      const std::size_t base = static_cast<std::size_t>(s) * k * plane + q;
      double mx = scores[base];
      for (int c = 1; c < k; ++c) mx = std::max<double>(mx, scores[base + c * plane]);
      double z = 0.0;
      for (int c = 0; c < k; ++c) {
        p[c] = std::exp(scores[base + c * plane] - mx);
        z += p[c];
      }
      total += std::log(z) + mx - scores[base + y * plane];
      ++count;
      if (grad) {
        for (int c = 0; c < k; ++c) (*grad)[base + c * plane] = static_cast<float>(p[c] / z);
        (*grad)[base + y * plane] -= 1.0f;
      }
    }
  }
  if (count == 0) return 0.0;
  if (grad) *grad *= static_cast<float>(1.0 / count);
  return total / static_cast<double>(count);
}

double SegmentationLoss(const Tensor& scores, const LabelTensor& labels,
                        Tensor* grad, std::int32_t ignore_label) {
  Require(scores.ndim() == 4, ErrorKind::kConfig,
          "segmentation scores must be (N, K, H, W), got " +
              ShapeToString(scores.shape()));
  return CrossEntropyLoss(scores, labels, grad, ignore_label);
}

DepthErrors DepthLoss(const Tensor& predicted, const Tensor& target, Tensor* grad) {
  Require(predicted.shape() == target.shape(), ErrorKind::kConfig,
          "depth prediction " + ShapeToString(predicted.shape()) +
              " does not match target " + ShapeToString(target.shape()));
  DepthErrors out;
  if (grad) *grad = Tensor(predicted.shape());
  double abs_sum = 0.0, rel_sum = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double y = target[i];
    if (!(y > 0.0)) continue;
    const double d = predicted[i] - y;
    abs_sum += std::abs(d);
    rel_sum += std::abs(d) / y;
    ++out.valid_pixels;
    if (grad) (*grad)[i] = d > 0 ? 1.0f : (d < 0 ? -1.0f : 0.0f);
  }
  if (out.valid_pixels == 0) return out;
  out.empty = false;
  out.mae = abs_sum / static_cast<double>(out.valid_pixels);
  out.rel = rel_sum / static_cast<double>(out.valid_pixels);
  if (grad) *grad *= static_cast<float>(1.0 / out.valid_pixels);
  return out;
}

double L1Loss(const Tensor& predicted, const Tensor& target, Tensor* grad) {
  Require(predicted.shape() == target.shape(), ErrorKind::kConfig,
          "prediction " + ShapeToString(predicted.shape()) +
              " does not match target " + ShapeToString(target.shape()));
  if (grad) *grad = Tensor(predicted.shape());
  if (predicted.empty()) return 0.0;
  double total = 0.0;
  const float scale = static_cast<float>(1.0 / predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = static_cast<double>(predicted[i]) - target[i];
    total += std::abs(d);
    if (grad) (*grad)[i] = d > 0 ? scale : (d < 0 ? -scale : 0.0f);
  }
  return total / static_cast<double>(predicted.size());
}

LossKind ParseLossKind(const std::string& name) {
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  if (name == "masked_l1") return LossKind::kMaskedL1;
  if (name == "l1") return LossKind::kL1;
  Fail(ErrorKind::kConfig, "unknown loss '" + name +
                               "' (expected cross_entropy, masked_l1 or l1)");
}

const char* LossKindName(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "cross_entropy";
    case LossKind::kMaskedL1: return "masked_l1";
    case LossKind::kL1: return "l1";
  }
  return "?";
}

double TaskLoss(LossKind kind, const Tensor& predicted, const TaskTarget& target,
                Tensor* grad) {
  switch (kind) {
    case LossKind::kCrossEntropy:
      return CrossEntropyLoss(predicted, target.labels, grad);
    case LossKind::kMaskedL1:
      return DepthLoss(predicted, target.values, grad).mae;
    case LossKind::kL1:
      return L1Loss(predicted, target.values, grad);
  }
  return 0.0;
}

void ValidateLossWeights(const LossWeights& w, std::size_t num_tasks) {
  Require(std::isfinite(w.omega) && w.omega >= 0, ErrorKind::kConfig,
          "weights.omega must be finite and >= 0");
  Require(w.per_task.empty() || w.per_task.size() == num_tasks, ErrorKind::kConfig,
          "weights.per_task has " + std::to_string(w.per_task.size()) +
              " entries for " + std::to_string(num_tasks) + " tasks");
  for (double v : w.per_task)
    Require(std::isfinite(v) && v >= 0, ErrorKind::kConfig,
            "weights.per_task entries must be finite and >= 0");
}

double TaskWeight(const LossWeights& w, std::size_t task) {
  return w.per_task.empty() ? 1.0 : w.per_task.at(task);
}

double CombinedLoss(std::span<const double> task_losses, double tp_loss,
                    const LossWeights& w) {
  ValidateLossWeights(w, task_losses.size());
  Require(std::isfinite(tp_loss), ErrorKind::kNumeric, "non-finite task privacy loss");
  double total = 0.0;
  for (std::size_t i = 0; i < task_losses.size(); ++i) {
    Require(std::isfinite(task_losses[i]), ErrorKind::kNumeric,
            "non-finite loss for task " + std::to_string(i));
    total += TaskWeight(w, i) * task_losses[i];
  }
  return total + w.omega * tp_loss;
}

}  // namespace mtsplit::objectives
