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

#include "mtsplit/data/synthetic.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "mtsplit/error.h"

namespace mtsplit::data {
namespace {

constexpr std::array<std::array<float, 3>, 6> kPalette = {{
    {0.90f, 0.15f, 0.15f},  // red
    {0.15f, 0.80f, 0.20f},  // green
    {0.20f, 0.30f, 0.95f},  // blue
    {0.95f, 0.85f, 0.10f},  // yellow
    {0.85f, 0.20f, 0.85f},  // magenta
    {0.10f, 0.85f, 0.90f},  // cyan
}};

// Explicit conversions keep datasets identical across standard libraries.
double Uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * Uniform(rng);
}

double Gaussian(std::mt19937_64& rng) {
  const double u1 = 1.0 - Uniform(rng), u2 = Uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

struct ShapeInstance {
  int shape_class;
  int color_class;
  double cx, cy, radius;
};

bool Inside(const ShapeInstance& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy, r = s.radius;
  switch (s.shape_class) {
    case 0: return std::abs(dx) <= 0.85 * r && std::abs(dy) <= 0.85 * r;
    case 1: return dy >= -r && dy <= r && std::abs(dx) <= 0.5 * (dy + r);
    case 2: return dx * dx + dy * dy <= r * r;
    default: return std::abs(dx) + std::abs(dy) <= r;
  }
}

void PaintBackground(Tensor& images, int n, const SyntheticSceneConfig& c,
                     std::mt19937_64& rng) {
  const double base = Uniform(rng, 0.35, 0.55);
  const double fx = Uniform(rng, 0.02, 0.08), fy = Uniform(rng, 0.02, 0.08);
  const double phase = Uniform(rng, 0.0, 2.0 * std::numbers::pi);
  std::array<double, 3> tint;
  for (double& t : tint) t = Uniform(rng, -0.04, 0.04);
  for (int y = 0; y < c.height; ++y)
    for (int x = 0; x < c.width; ++x) {
      const double stripe =
          0.06 * std::sin(2.0 * std::numbers::pi * (fx * x + fy * y) + phase);
      for (int ch = 0; ch < 3; ++ch)
        images.at(n, ch, y, x) = static_cast<float>(base + tint[ch] + stripe);
    }
}

void PaintShape(Tensor& images, int n, const ShapeInstance& s, double brightness) {
  const auto& color = kPalette[s.color_class];
  const int h = images.dim(2), w = images.dim(3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!Inside(s, x + 0.5, y + 0.5)) continue;
      for (int ch = 0; ch < 3; ++ch)
        images.at(n, ch, y, x) = static_cast<float>(color[ch] * brightness);
    }
}

void AddNoiseAndClamp(Tensor& images, int n, double level, std::mt19937_64& rng) {
  const std::size_t stride = images.SampleSize();
  float* p = images.data() + n * stride;
  for (std::size_t i = 0; i < stride; ++i) {
    const double v = p[i] + level * Gaussian(rng);
    p[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
}

ShapeInstance DrawShape(int shape_class, int color_class,
                        const SyntheticSceneConfig& c, std::mt19937_64& rng) {
  const double side = std::min(c.height, c.width);
  double lo = 0.18 * side, hi = 0.32 * side;
  if (Uniform(rng) < c.size_color_correlation) {
    if (color_class % 2 == 0)
      lo = 0.26 * side;
    else
      hi = 0.24 * side;
  }
  ShapeInstance s{shape_class, color_class, 0, 0, Uniform(rng, lo, hi)};
  s.cx = Uniform(rng, s.radius + 1.0, c.width - s.radius - 1.0);
  s.cy = Uniform(rng, s.radius + 1.0, c.height - s.radius - 1.0);
  return s;
}

}  // namespace

void ValidateSceneConfig(const SyntheticSceneConfig& c) {
  Require(c.height >= 32 && c.width >= 32, ErrorKind::kConfig,
          "synthetic images must be at least 32x32 (got " + std::to_string(c.height) +
              "x" + std::to_string(c.width) + ")");
  Require(c.num_samples >= 0, ErrorKind::kConfig, "num_samples must be >= 0");
  Require(c.num_shapes >= 0 && c.num_shapes <= 4, ErrorKind::kConfig,
          "num_shapes must be in 0..4");
  Require(c.shape_classes >= 1 && c.shape_classes <= 4, ErrorKind::kConfig,
          "shape_classes must be in 1..4");
  Require(c.color_classes >= 1 && c.color_classes <= static_cast<int>(kPalette.size()),
          ErrorKind::kConfig, "color_classes must be in 1..6");
  Require(c.noise_level >= 0 && c.noise_level <= 1, ErrorKind::kConfig,
          "noise_level must be in [0, 1]");
  Require(c.size_color_correlation >= 0 && c.size_color_correlation <= 1,
          ErrorKind::kConfig, "size_color_correlation must be in [0, 1]");
}

Dataset GenerateClassificationPair(const SyntheticSceneConfig& c) {
  ValidateSceneConfig(c);
  std::mt19937_64 rng(c.seed);
  const int n = c.num_samples;
  const int cells = c.shape_classes * c.color_classes;
  std::vector<int> cell(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) cell[i] = i % cells;
  for (int i = n - 1; i > 0; --i)
    std::swap(cell[i], cell[rng() % static_cast<std::uint64_t>(i + 1)]);

  Dataset d;
  d.images = Tensor({n, 3, c.height, c.width});
  d.task_ids = {"shape", "color"};
  d.targets.resize(2);
  d.targets[0].labels = LabelTensor({n});
  d.targets[1].labels = LabelTensor({n});
  for (int i = 0; i < n; ++i) {
    const int shape = cell[i] / c.color_classes, color = cell[i] % c.color_classes;
    d.targets[0].labels.values[i] = shape;
    d.targets[1].labels.values[i] = color;
    PaintBackground(d.images, i, c, rng);
    PaintShape(d.images, i, DrawShape(shape, color, c, rng), Uniform(rng, 0.85, 1.05));
    AddNoiseAndClamp(d.images, i, c.noise_level, rng);
  }
  return d;
}

Dataset GenerateDensePair(const SyntheticSceneConfig& c) {
  ValidateSceneConfig(c);
  std::mt19937_64 rng(c.seed);
  const int n = c.num_samples;
  Dataset d;
  d.images = Tensor({n, 3, c.height, c.width});
  d.task_ids = {"segmentation", "depth"};
  d.targets.resize(2);
  d.targets[0].labels = LabelTensor({n, c.height, c.width});
  d.targets[1].values = Tensor({n, 1, c.height, c.width});
  auto& mask = d.targets[0].labels;
  auto& depth = d.targets[1].values;
  for (int i = 0; i < n; ++i) {
    PaintBackground(d.images, i, c, rng);
    for (int k = 0; k < c.num_shapes; ++k) {
      const int shape = static_cast<int>(rng() % c.shape_classes);
      const int color = static_cast<int>(rng() % c.color_classes);
      const ShapeInstance s = DrawShape(shape, color, c, rng);
      PaintShape(d.images, i, s, Uniform(rng, 0.85, 1.05));
      // Later shapes sit on top and are nearer.
      const double level = 1.0 + (c.num_shapes - k) + Uniform(rng, 0.0, 0.3);
      for (int y = 0; y < c.height; ++y)
        for (int x = 0; x < c.width; ++x) {
          if (!Inside(s, x + 0.5, y + 0.5)) continue;
          mask.values[(static_cast<std::size_t>(i) * c.height + y) * c.width + x] =
              shape + 1;
          depth.at(i, 0, y, x) =
              static_cast<float>(level + 0.2 * (y + 0.5 - s.cy) / s.radius);
        }
    }
    AddNoiseAndClamp(d.images, i, c.noise_level, rng);
  }
  return d;
}

}  // namespace mtsplit::data
