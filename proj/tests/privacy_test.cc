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

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "mtsplit/error.h"
#include "mtsplit/privacy/accountant.h"
#include "mtsplit/privacy/dp.h"
#include "rdp_oracle.h"

namespace mtsplit::privacy {
namespace {

double Norm(const std::vector<float>& g) {
  double s = 0.0;
  for (float v : g) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

TEST(ClipTest, BelowThresholdIsUntouched) {
  std::vector<float> g = {0.3f, -0.4f};  // norm 0.5
  GradientSet out = ClipPerSample({g}, 1.2);
  EXPECT_EQ(out[0], g);
}

TEST(ClipTest, ScalesByNormRatio) {
  std::vector<float> g(5, 0.0f);
  g[0] = 2.4f;
  GradientSet out = ClipPerSample({g}, 1.2);
  EXPECT_FLOAT_EQ(out[0][0], 1.2f);
  for (int i = 1; i < 5; ++i) EXPECT_EQ(out[0][i], 0.0f);
}

TEST(ClipTest, PreservesDirectionOfLargeGradient) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<double> raw(1000);
  double norm = 0.0;
  for (double& v : raw) {
    v = normal(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  std::vector<float> g(1000);
  for (int i = 0; i < 1000; ++i) g[i] = static_cast<float>(raw[i] * 7.3 / norm);
  const std::vector<float> clipped = ClipPerSample({g}, 1.2)[0];
  double dot = 0.0;
  for (int i = 0; i < 1000; ++i) dot += static_cast<double>(g[i]) * clipped[i];
  EXPECT_NEAR(Norm(clipped), 1.2, 1e-6);
  EXPECT_NEAR(dot / (Norm(g) * Norm(clipped)), 1.0, 1e-6);
}

TEST(ClipTest, NormNeverExceedsThreshold) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  std::uniform_int_distribution<int> dim(1, 300);
  for (int trial = 0; trial < 2000; ++trial) {
    std::normal_distribution<double> normal(0.0, scale(rng));
    std::vector<float> g(dim(rng));
    for (float& v : g) v = static_cast<float>(normal(rng));
    const double c = scale(rng) / 10.0;
    std::vector<float> out = g;
    ClipInPlace(out, c);
    EXPECT_LE(Norm(out), c);
    if (Norm(g) <= c) EXPECT_EQ(out, g);
  }
}

TEST(ClipTest, NonFiniteEntryNamesSample) {
  GradientSet grads = {{1.0f}, {2.0f}, {std::numeric_limits<float>::quiet_NaN()}};
  try {
    ClipPerSample(grads, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
    EXPECT_NE(std::string(e.what()).find("sample 2"), std::string::npos);
  }
}

TEST(NoisyAggregateTest, ZeroNoiseIsExactMean) {
  NoiseSource noise(0);
  GradientSet grads = {{1.0f, 2.0f}, {3.0f, -2.0f}, {2.0f, 0.5f}};
  std::vector<float> out = NoisyAggregate(grads, 0.0, 1.2, noise);
  EXPECT_FLOAT_EQ(out[0], 2.0f);
  EXPECT_FLOAT_EQ(out[1], 0.5f / 3.0f);
  std::vector<float> zero = NoisyAggregate({{0.7f, -1.1f}, {-0.7f, 1.1f}}, 0.0, 1.2, noise);
  EXPECT_EQ(zero, std::vector<float>({0.0f, 0.0f}));
}

TEST(NoisyAggregateTest, NoiseHasStddevSigmaTimesClip) {
  constexpr int kDraws = 100000;
  NoiseSource noise(7);
  std::vector<float> out = NoisyAggregate({std::vector<float>(kDraws, 0.0f)}, 1.0, 1.2, noise);
  double mean = 0.0, sq = 0.0;
  for (float v : out) {
    mean += v;
    sq += static_cast<double>(v) * v;
  }
  mean /= kDraws;
  const double stddev = std::sqrt(sq / kDraws - mean * mean);
  EXPECT_NEAR(stddev, 1.2, 0.02 * 1.2);
  EXPECT_LT(std::fabs(mean), 3.0 * 1.2 / std::sqrt(kDraws));
}

TEST(NoisyAggregateTest, SeededDeterminismAndErrors) {
  GradientSet grads = {{0.1f, 0.2f, 0.3f}, {0.0f, -0.1f, 0.4f}};
  NoiseSource a(99), b(99), c(100);
  const auto ra = NoisyAggregate(grads, 1.3, 1.2, a);
  EXPECT_EQ(ra, NoisyAggregate(grads, 1.3, 1.2, b));
  EXPECT_NE(ra, NoisyAggregate(grads, 1.3, 1.2, c));
  EXPECT_THROW(NoisyAggregate(grads, -1.0, 1.2, a), Error);
}

TEST(AccountantTest, NoStepsMeansNoSpend) {
  EXPECT_EQ(ComputeEpsilon(0.01, 1.0, 0, 1e-5), 0.0);
  PrivacyLedger ledger(DPConfig{});
  EXPECT_EQ(ledger.Epsilon(), 0.0);
}

TEST(AccountantTest, ZeroNoiseSignalsInfiniteEpsilon) {
  EXPECT_TRUE(std::isinf(ComputeEpsilon(0.01, 0.0, 10, 1e-5)));
  DPConfig c;
  c.noise_multiplier = 0.0;
  PrivacyLedger ledger(c);
  ledger.Step();
  EXPECT_TRUE(std::isinf(ledger.Epsilon()));
  EXPECT_TRUE(ledger.Exhausted());
}

TEST(AccountantTest, DivergenceMatchesQuadratureOracle) {
  for (double q : {0.01, 0.2}) {
    for (double sigma : {0.8, 1.0, 3.0}) {
      for (double alpha : {1.25, 2.0, 2.5, 10.75, 32.0, 63.5, 200.0}) {
        const double expected = mtsplit::testing::QuadratureRdp(q, sigma, alpha);
        const double actual = SubsampledGaussianRdp(q, sigma, alpha);
        EXPECT_NEAR(actual, expected, 1e-6 * std::max(1.0, std::fabs(expected)))
            << "q=" << q << " sigma=" << sigma << " alpha=" << alpha;
      }
    }
  }
}

TEST(AccountantTest, EpsilonMatchesQuadratureOracle) {
  const double expected =
      mtsplit::testing::QuadratureEpsilon(0.01, 1.0, 1000, 1e-5, DefaultOrders());
  const double actual = ComputeEpsilon(0.01, 1.0, 1000, 1e-5);
  EXPECT_NEAR(actual, expected, 1e-3 * expected);
  EXPECT_GT(actual, 0.5);
  EXPECT_LT(actual, 5.0);
}

TEST(AccountantTest, Monotonicity) {
  const double base = ComputeEpsilon(0.01, 1.0, 1000, 1e-5);
  EXPECT_LT(ComputeEpsilon(0.01, 2.0, 1000, 1e-5), base);
  EXPECT_GT(ComputeEpsilon(0.01, 1.0, 2000, 1e-5), base);
  EXPECT_GT(ComputeEpsilon(0.02, 1.0, 1000, 1e-5), base);
  EXPECT_GT(ComputeEpsilon(0.01, 1.0, 1000, 1e-6), base);
}

TEST(PrivacyLedgerTest, AccumulatesAndRoundTrips) {
  DPConfig c;
  c.noise_multiplier = 1.1;
  c.sample_rate = 0.05;
  PrivacyLedger ledger(c);
  std::vector<double> previous = ledger.rdp();
  for (int t = 0; t < 25; ++t) {
    ledger.Step();
    for (std::size_t i = 0; i < previous.size(); ++i) EXPECT_GE(ledger.rdp()[i], previous[i]);
    previous = ledger.rdp();
  }
  EXPECT_EQ(ledger.steps(), 25);
  EXPECT_NEAR(ledger.Epsilon(), ComputeEpsilon(0.05, 1.1, 25, 1e-5), 1e-9);
  PrivacyLedger copy = PrivacyLedger::Deserialize(ledger.Serialize());
  EXPECT_EQ(copy.steps(), 25);
  EXPECT_EQ(copy.Epsilon(), ledger.Epsilon());
  EXPECT_THROW(PrivacyLedger::Deserialize("{not json"), Error);
}

TEST(CalibrateSigmaTest, RoundTripsThroughAccountant) {
  DPConfig c;
  c.sample_rate = 0.01;
  c.target_epsilon = 4.0;
  c.target_delta = 1e-5;
  const double sigma = CalibrateSigma(c, 2000);
  const double eps = ComputeEpsilon(0.01, sigma, 2000, 1e-5);
  EXPECT_LE(eps, 4.0);
  EXPECT_GE(eps, 4.0 - 0.05);
}

TEST(CalibrateSigmaTest, GrowsWithStepsAndShrinkingEpsilon) {
  DPConfig c;
  c.sample_rate = 0.01;
  c.target_epsilon = 4.0;
  const double base = CalibrateSigma(c, 1000);
  EXPECT_GT(CalibrateSigma(c, 2000), base);
  c.target_epsilon = 2.0;
  EXPECT_GT(CalibrateSigma(c, 1000), base);
}

TEST(CalibrateSigmaTest, UnattainableTargetReportsRange) {
  DPConfig c;
  c.sample_rate = 1.0;
  c.target_epsilon = 1e-4;
  try {
    CalibrateSigma(c, 100000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCalibration);
    EXPECT_NE(std::string(e.what()).find("achievable"), std::string::npos);
  }
}

TEST(DPConfigTest, RejectsInvalidFields) {
  DPConfig c;
  c.clip_threshold = 0.0;
  EXPECT_THROW(ValidateDPConfig(c), Error);
  c = DPConfig{};
  c.sample_rate = 0.0;
  EXPECT_THROW(ValidateDPConfig(c), Error);
  c = DPConfig{};
  c.target_delta = 1.0;
  EXPECT_THROW(ValidateDPConfig(c), Error);
  c = DPConfig{};
  c.noise_multiplier = -0.1;
  EXPECT_THROW(ValidateDPConfig(c), Error);
}

}  // namespace
}  // namespace mtsplit::privacy
