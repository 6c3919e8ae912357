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

#ifndef MTSPLIT_OBJECTIVES_SIMILARITY_H_
#define MTSPLIT_OBJECTIVES_SIMILARITY_H_

#include <string>
#include <vector>

#include "mtsplit/tensor.h"

namespace mtsplit::objectives {

enum class SimilarityKind { kSsim, kMsSsim };

SimilarityKind ParseSimilarityKind(const std::string& name);
const char* SimilarityKindName(SimilarityKind kind);

struct SimilarityMeasure {
  SimilarityKind kind = SimilarityKind::kSsim;
  int window_size = 11;
  double gaussian_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  int scales = 3;  // MS-SSIM only
};

void ValidateSimilarityMeasure(const SimilarityMeasure& m);

// Smallest spatial extent accepted by the measure.
int MinimumSpatialSize(const SimilarityMeasure& m);

// Structural similarity of two feature maps, (N, C, H, W) or (C, H, W).
// Computed per channel with a valid Gaussian window and averaged over
// samples and channels. The dynamic range is the per-sample min/max of the
// pair and is treated as a constant when differentiating. Gradients of the
// returned value are written to grad_a / grad_b when given.
double Similarity(const Tensor& a, const Tensor& b, const SimilarityMeasure& m,
                  Tensor* grad_a = nullptr, Tensor* grad_b = nullptr);

// Sum of Similarity over ordered pairs (i, j), i != j. When grads is given it
// receives one gradient tensor per feature.
double TaskPrivacyLoss(const std::vector<Tensor>& features,
                       const SimilarityMeasure& m,
                       std::vector<Tensor>* grads = nullptr);

}  // namespace mtsplit::objectives

#endif  // MTSPLIT_OBJECTIVES_SIMILARITY_H_
