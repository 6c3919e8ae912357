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

#ifndef MTSPLIT_PRIVACY_DP_H_
#define MTSPLIT_PRIVACY_DP_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mtsplit::privacy {

struct DPConfig {
  double clip_threshold = 1.2;    // C, L2 bound on each per-sample gradient
  double noise_multiplier = 1.0;  // sigma
  double sample_rate = 0.01;      // q, batch size / dataset size
  double target_epsilon = 4.0;
  double target_delta = 1e-5;
};

// Throws kConfig when C <= 0, sigma < 0, q outside (0, 1] or delta outside
// (0, 1). C may be +inf (clipping disabled).
void ValidateDPConfig(const DPConfig& config);

using GradientSet = std::vector<std::vector<float>>;

// Rescales g to g / max(1, |g|_2 / C) in place and returns the input norm.
// Vectors already inside the ball are not touched. The result is guaranteed
// to satisfy |g|_2 <= C when evaluated in double precision.
double ClipInPlace(std::span<float> gradient, double clip_threshold);

// Per-sample clipping. Throws kNumeric naming the first sample with a
// non-finite entry.
GradientSet ClipPerSample(const GradientSet& gradients, double clip_threshold);

// Seedable Gaussian source for the aggregate noise.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : rng_(seed) {}
  double Next(double stddev) { return stddev * normal_(rng_); }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// (1/n) * sum_i (clipped_i + nu_i) with nu_i ~ N(0, sigma^2 C^2 I) drawn per
// sample. sigma == 0 returns the plain mean.
std::vector<float> NoisyAggregate(const GradientSet& clipped, double sigma,
                                  double clip_threshold, NoiseSource& noise);

}  // namespace mtsplit::privacy

#endif  // MTSPLIT_PRIVACY_DP_H_
