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

#ifndef MTSPLIT_DATA_SYNTHETIC_H_
#define MTSPLIT_DATA_SYNTHETIC_H_

#include <cstdint>

#include "mtsplit/data/dataset.h"

namespace mtsplit::data {

// Scenes of coloured geometric shapes on a textured background. Pixel values
// lie in [0, 1].
struct SyntheticSceneConfig {
  int height = 32;
  int width = 32;
  int num_samples = 1000;
  int num_shapes = 1;      // shapes per image in dense scenes
  int shape_classes = 2;   // up to 4: square, triangle, circle, diamond
  int color_classes = 2;   // up to 6
  double noise_level = 0.03;
  // Probability that a shape's size is tied to the parity of its colour class.
  double size_color_correlation = 0.3;
  std::uint64_t seed = 0;
};

void ValidateSceneConfig(const SyntheticSceneConfig& config);

// One shape per image. Tasks "shape" and "color" with every (shape, color)
// cell holding num_samples / cells samples, plus one for the first
// num_samples % cells cells.
Dataset GenerateClassificationPair(const SyntheticSceneConfig& config);

// Up to num_shapes shapes per image. Task "segmentation" labels pixels with
// shape class + 1 (background 0). Task "depth" is (N, 1, H, W), zero on the
// background and a per-shape constant plus a smooth ramp elsewhere.
Dataset GenerateDensePair(const SyntheticSceneConfig& config);

}  // namespace mtsplit::data

#endif  // MTSPLIT_DATA_SYNTHETIC_H_
