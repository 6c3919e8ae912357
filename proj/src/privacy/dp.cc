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

#include "mtsplit/privacy/dp.h"

#include <cmath>
#include <string>

#include "mtsplit/error.h"

namespace mtsplit::privacy {
namespace {

double Norm(std::span<const float> g) {
  double s = 0.0;
  for (float v : g) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

}  // namespace

void ValidateDPConfig(const DPConfig& c) {
  Require(c.clip_threshold > 0.0 && !std::isnan(c.clip_threshold), ErrorKind::kConfig,
          "dp.clip_threshold must be > 0");
  Require(c.noise_multiplier >= 0.0 && std::isfinite(c.noise_multiplier),
          ErrorKind::kConfig, "dp.noise_multiplier must be finite and >= 0");
  Require(c.sample_rate > 0.0 && c.sample_rate <= 1.0, ErrorKind::kConfig,
          "dp.sample_rate must lie in (0, 1]");
  Require(c.target_delta > 0.0 && c.target_delta < 1.0, ErrorKind::kConfig,
          "dp.target_delta must lie in (0, 1)");
  Require(c.target_epsilon > 0.0, ErrorKind::kConfig, "dp.target_epsilon must be > 0");
}

double ClipInPlace(std::span<float> gradient, double clip_threshold) {
  const double norm = Norm(gradient);
  if (!(norm > clip_threshold)) return norm;
  double factor = clip_threshold / norm;
  for (;;) {
    double s = 0.0;
    for (float v : gradient) {
      const double scaled = static_cast<float>(v * factor);
      s += scaled * scaled;
    }
    if (std::sqrt(s) <= clip_threshold) break;
    factor = std::nextafter(factor, 0.0) * (1.0 - 1e-12);
  }
  for (float& v : gradient) v = static_cast<float>(v * factor);
  return norm;
}

GradientSet ClipPerSample(const GradientSet& gradients, double clip_threshold) {
  Require(clip_threshold > 0.0, ErrorKind::kConfig, "clip threshold must be > 0");
  GradientSet out = gradients;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (float v : out[i]) {
      Require(std::isfinite(v), ErrorKind::kNumeric,
              "non-finite gradient entry in sample " + std::to_string(i));
    }
    ClipInPlace(out[i], clip_threshold);
  }
  return out;
}

std::vector<float> NoisyAggregate(const GradientSet& clipped, double sigma,
                                  double clip_threshold, NoiseSource& noise) {
  Require(sigma >= 0.0, ErrorKind::kConfig, "noise multiplier must be >= 0");
  Require(!clipped.empty(), ErrorKind::kConfig, "noisy aggregate needs >= 1 sample");
  Require(sigma == 0.0 || std::isfinite(clip_threshold), ErrorKind::kConfig,
          "noise needs a finite clip threshold");
  const std::size_t dim = clipped[0].size();
  std::vector<double> sum(dim, 0.0);
  const double stddev = sigma == 0.0 ? 0.0 : sigma * clip_threshold;
  for (const auto& g : clipped) {
    Require(g.size() == dim, ErrorKind::kConfig,
            "clipped gradients differ in dimension");
    for (std::size_t j = 0; j < dim; ++j) {
      sum[j] += g[j];
      if (stddev > 0.0) sum[j] += noise.Next(stddev);
    }
  }
  std::vector<float> out(dim);
  const double inv_n = 1.0 / static_cast<double>(clipped.size());
  for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<float>(sum[j] * inv_n);
  return out;
}

}  // namespace mtsplit::privacy
