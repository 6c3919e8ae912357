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

#include "mtsplit/objectives/metrics.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mtsplit/error.h"

namespace mtsplit::objectives {

SegmentationScores SegmentationMetrics(const LabelTensor& predicted,
                                       const LabelTensor& target,
                                       int num_classes, std::int32_t ignore_label) {
  Require(predicted.shape == target.shape, ErrorKind::kConfig,
          "segmentation prediction " + ShapeToString(predicted.shape) +
              " does not match target " + ShapeToString(target.shape));
  std::vector<double> inter(num_classes, 0), pred_count(num_classes, 0),
      target_count(num_classes, 0);
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const std::int32_t t = target.values[i];
    if (t == ignore_label || t < 0 || t >= num_classes) continue;
    const std::int32_t p = predicted.values[i];
    ++total;
    ++target_count[t];
    if (p >= 0 && p < num_classes) ++pred_count[p];
    if (p == t) {
      ++correct;
      ++inter[t];
    }
  }
  SegmentationScores out;
  if (total == 0) return out;
  out.pixel_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  double iou_sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (target_count[c] == 0) continue;
    iou_sum += inter[c] / (target_count[c] + pred_count[c] - inter[c]);
    ++present;
  }
  out.miou = iou_sum / present;
  return out;
}

NormalScores SurfaceNormalMetrics(const Tensor& predicted, const Tensor& target,
                                  double unit_tolerance) {
  Require(predicted.shape() == target.shape(), ErrorKind::kConfig,
          "normal prediction " + ShapeToString(predicted.shape()) +
              " does not match target " + ShapeToString(target.shape()));
  Require(predicted.ndim() == 4 && predicted.dim(1) == 3, ErrorKind::kConfig,
          "normal maps must be (N, 3, H, W), got " + ShapeToString(predicted.shape()));
  const int n = predicted.dim(0), h = predicted.dim(2), w = predicted.dim(3);
  std::vector<double> angles;
  angles.reserve(static_cast<std::size_t>(n) * h * w);
  for (int s = 0; s < n; ++s)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double dot = 0, np = 0, nt = 0;
        for (int c = 0; c < 3; ++c) {
          const double p = predicted.at(s, c, i, j), t = target.at(s, c, i, j);
          dot += p * t;
          np += p * p;
          nt += t * t;
        }
        if (std::abs(std::sqrt(np) - 1.0) > unit_tolerance ||
            std::abs(std::sqrt(nt) - 1.0) > unit_tolerance) {
          Fail(ErrorKind::kData, "non-unit normal vector at sample " +
                                     std::to_string(s) + ", pixel (" +
                                     std::to_string(i) + ", " + std::to_string(j) + ")");
        }
        angles.push_back(std::acos(std::clamp(dot, -1.0, 1.0)) * 180.0 /
                         std::numbers::pi);
      }
  NormalScores out;
  if (angles.empty()) return out;
  double sum = 0;
  std::size_t a = 0, b = 0, c = 0;
  for (double v : angles) {
    sum += v;
    a += v < 11.25;
    b += v < 22.5;
    c += v < 30.0;
  }
  const double count = static_cast<double>(angles.size());
  out.mean_degrees = sum / count;
  out.within_11_25 = a / count;
  out.within_22_5 = b / count;
  out.within_30 = c / count;
  std::sort(angles.begin(), angles.end());
  const std::size_t mid = angles.size() / 2;
  out.median_degrees = angles.size() % 2 ? angles[mid]
                                         : 0.5 * (angles[mid - 1] + angles[mid]);
  return out;
}

LabelTensor ArgMax(const Tensor& scores) {
  Require(scores.ndim() == 2 || scores.ndim() == 4, ErrorKind::kConfig,
          "argmax expects (N, K) or (N, K, H, W) scores");
  const int n = scores.dim(0), k = scores.dim(1);
  const int h = scores.ndim() == 4 ? scores.dim(2) : 1;
  const int w = scores.ndim() == 4 ? scores.dim(3) : 1;
  LabelTensor out(scores.ndim() == 4 ? Shape{n, h, w} : Shape{n});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int s = 0; s < n; ++s)
    for (std::size_t q = 0; q < plane; ++q) {
      const std::size_t base = static_cast<std::size_t>(s) * k * plane + q;
      int best = 0;
      for (int c = 1; c < k; ++c)
        if (scores[base + c * plane] > scores[base + best * plane]) best = c;
      out.values[s * plane + q] = best;
    }
  return out;
}

double Accuracy(const LabelTensor& predicted, const LabelTensor& target,
                std::int32_t ignore_label) {
  Require(predicted.shape == target.shape, ErrorKind::kConfig,
          "prediction " + ShapeToString(predicted.shape) + " does not match target " +
              ShapeToString(target.shape));
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target.values[i] == ignore_label) continue;
    ++total;
    correct += predicted.values[i] == target.values[i];
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

void ValidateEvaluationPolicy(const EvaluationPolicy& p) {
  Require(p.target_accuracy > 0 && p.target_accuracy < 1, ErrorKind::kConfig,
          "evaluation.target_accuracy must lie in (0, 1)");
}

}  // namespace mtsplit::objectives
