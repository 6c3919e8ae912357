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

#ifndef MTSPLIT_TESTS_TEST_UTIL_H_
#define MTSPLIT_TESTS_TEST_UTIL_H_

#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "mtsplit/nn/module.h"
#include "mtsplit/tensor.h"

namespace mtsplit::testing {

inline double Dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

// Compares Backward of `module` against central differences of the scalar
// <probe, module(x)> for a sample of input and parameter coordinates.
inline void ExpectGradientsMatch(nn::Module& module, Tensor input,
                                 std::uint64_t seed, double step = 1e-2,
                                 double tolerance = 2e-2, int samples = 40) {
  std::mt19937_64 rng(seed);
  Tensor out = module.Forward(input);
  Tensor probe = Tensor::RandomNormal(out.shape(), rng);
  module.ZeroGrad();
  module.Forward(input);
  Tensor grad_input = module.Backward(probe);
  auto objective = [&](const Tensor& x) { return Dot(probe, module.Forward(x)); };

  auto check = [&](double analytic, double numeric, const std::string& what) {
    const double scale = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
    EXPECT_NEAR(analytic, numeric, tolerance * scale) << what;
  };

  std::uniform_int_distribution<std::size_t> pick_in(0, input.size() - 1);
  for (int s = 0; s < samples; ++s) {
    const std::size_t i = pick_in(rng);
    Tensor plus = input, minus = input;
    plus[i] += static_cast<float>(step);
    minus[i] -= static_cast<float>(step);
    check(grad_input[i], (objective(plus) - objective(minus)) / (2 * step),
          "input coordinate " + std::to_string(i));
  }
  for (nn::Parameter* p : module.Parameters()) {
    std::uniform_int_distribution<std::size_t> pick(0, p->value.size() - 1);
    for (int s = 0; s < std::min<int>(samples / 4 + 1, static_cast<int>(p->value.size())); ++s) {
      const std::size_t i = pick(rng);
      const float original = p->value[i];
      p->value[i] = original + static_cast<float>(step);
      const double up = objective(input);
      p->value[i] = original - static_cast<float>(step);
      const double down = objective(input);
      p->value[i] = original;
      check(p->grad[i], (up - down) / (2 * step), p->name + "[" + std::to_string(i) + "]");
    }
  }
}

}  // namespace mtsplit::testing

#endif  // MTSPLIT_TESTS_TEST_UTIL_H_
