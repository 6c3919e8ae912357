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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mtsplit/error.h"
#include "mtsplit/objectives/losses.h"
#include "mtsplit/objectives/metrics.h"
#include "mtsplit/objectives/similarity.h"
#include "oracles.h"

namespace mtsplit::objectives {
namespace {

using testing::ConfusionOracle;
using testing::NaiveCrossEntropy;
using testing::RandomUnitNormals;
using testing::SingleWindowSsim;


// Central-difference directional derivative check. The first element of
// every sample is pinned to fixed extremes so the dynamic range stays put.
void CheckSimilarityGradient(Shape shape, const SimilarityMeasure& m,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor a = Tensor::RandomUniform(shape, rng, -1, 1);
  Tensor b = Tensor::RandomUniform(shape, rng, -1, 1);
  for (std::size_t i = 0; i < a.size(); ++i) b[i] = 0.6f * a[i] + 0.4f * b[i];
  const std::size_t stride = a.SampleSize();
  for (int n = 0; n < shape[0]; ++n) {
    a[n * stride] = -3.0f;
    b[n * stride] = 3.0f;
  }
  Tensor ga, gb;
  Similarity(a, b, m, &ga, &gb);
  for (int trial = 0; trial < 4; ++trial) {
    Tensor da = Tensor::RandomNormal(shape, rng), db = Tensor::RandomNormal(shape, rng);
    for (int n = 0; n < shape[0]; ++n) da[n * stride] = db[n * stride] = 0;
    double analytic = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      analytic += double(ga[i]) * da[i] + double(gb[i]) * db[i];
    const float h = 1e-2f;
    Tensor ap = a, am = a, bp = b, bm = b;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ap[i] += h * da[i];
      am[i] -= h * da[i];
      bp[i] += h * db[i];
      bm[i] -= h * db[i];
    }
    const double numeric = (Similarity(ap, bp, m) - Similarity(am, bm, m)) / (2.0 * h);
    EXPECT_NEAR(analytic, numeric, 2e-3 * std::max(1.0, std::abs(numeric)))
        << "trial " << trial;
  }
}

TEST(CrossEntropyTest, UniformScoresGiveLogOfClassCount) {
  Tensor scores({2, 13, 3, 3}, 0.7f);
  LabelTensor labels({2, 3, 3});
  for (std::size_t i = 0; i < labels.size(); ++i) labels.values[i] = i % 13;
  EXPECT_NEAR(SegmentationLoss(scores, labels), std::log(13.0), 1e-6);
}

TEST(CrossEntropyTest, LargeMarginDrivesLossToZero) {
  Tensor scores({1, 3, 2, 2});
  LabelTensor labels({1, 2, 2}, 1);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) scores.at(0, 1, i, j) = 50.0f;
  EXPECT_LT(SegmentationLoss(scores, labels), 1e-12);
}

TEST(CrossEntropyTest, MatchesScalarLoopOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + trial % 5, h = 1 + trial % 8, w = 1 + (trial * 3) % 8;
    Tensor scores = Tensor::RandomNormal({2, k, h, w}, rng, 2.0);
    LabelTensor labels({2, h, w});
    for (auto& v : labels.values) v = static_cast<int>(rng() % (k + 1)) - 1;
    labels.values[0] = 0;
    EXPECT_NEAR(SegmentationLoss(scores, labels), NaiveCrossEntropy(scores, labels), 1e-6);
  }
}

TEST(CrossEntropyTest, GradientIsSoftmaxMinusOneHot) {
  std::mt19937_64 rng(4);
  Tensor scores = Tensor::RandomNormal({3, 4}, rng);
  LabelTensor labels({3}, std::vector<std::int32_t>{0, 3, kIgnoreLabel});
  Tensor grad;
  const double base = CrossEntropyLoss(scores, labels, &grad);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    Tensor p = scores;
    p[i] += 1e-3f;
    Tensor m = scores;
    m[i] -= 1e-3f;
    const double fd = (CrossEntropyLoss(p, labels) - CrossEntropyLoss(m, labels)) / 2e-3;
    EXPECT_NEAR(grad[i], fd, 1e-3) << i;
  }
  EXPECT_GT(base, 0);
  for (int c = 0; c < 4; ++c) EXPECT_EQ(grad[8 + c], 0.0f);
}

TEST(CrossEntropyTest, OutOfRangeLabelNamesThePixel) {
  Tensor scores({1, 3, 4, 4});
  LabelTensor labels({1, 4, 4});
  labels.values[2 * 4 + 1] = 7;
  try {
    SegmentationLoss(scores, labels);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    EXPECT_NE(std::string(e.what()).find("pixel (2, 1)"), std::string::npos) << e.what();
  }
}

TEST(DepthLossTest, IdenticalMapsGiveZero) {
  std::mt19937_64 rng(5);
  Tensor t = Tensor::RandomUniform({2, 1, 8, 8}, rng, 0.1, 5.0);
  const DepthErrors e = DepthLoss(t, t);
  EXPECT_FALSE(e.empty);
  EXPECT_EQ(e.mae, 0.0);
  EXPECT_EQ(e.rel, 0.0);
}

TEST(DepthLossTest, AllZeroTargetIsEmptyMask) {
  Tensor pred({1, 1, 4, 4}, 2.0f), target({1, 1, 4, 4});
  Tensor grad;
  const DepthErrors e = DepthLoss(pred, target, &grad);
  EXPECT_TRUE(e.empty);
  EXPECT_EQ(e.valid_pixels, 0u);
  EXPECT_EQ(grad.SquaredNorm(), 0.0);
}

TEST(DepthLossTest, MatchesScalarLoopOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 1 + trial % 8, w = 1 + (trial * 5) % 8;
    Tensor pred = Tensor::RandomUniform({1, 1, h, w}, rng, -1, 4);
    Tensor target = Tensor::RandomUniform({1, 1, h, w}, rng, -1, 4);
    target[0] = 1.5f;
    double abs_sum = 0, rel_sum = 0;
    int count = 0;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double y = target.at(0, 0, i, j), p = pred.at(0, 0, i, j);
        if (y <= 0) continue;
        abs_sum += std::abs(y - p);
        rel_sum += std::abs(y - p) / y;
        ++count;
      }
    const DepthErrors e = DepthLoss(pred, target);
    EXPECT_EQ(e.valid_pixels, static_cast<std::size_t>(count));
    EXPECT_NEAR(e.mae, abs_sum / count, 1e-6);
    EXPECT_NEAR(e.rel, rel_sum / count, 1e-6);
  }
}

TEST(NormalMetricsTest, IdenticalAndOpposite) {
  std::mt19937_64 rng(7);
  Tensor t = RandomUnitNormals({1, 3, 4, 4}, rng);
  NormalScores same = SurfaceNormalMetrics(t, t);
  EXPECT_NEAR(same.mean_degrees, 0, 1e-2);
  EXPECT_NEAR(same.median_degrees, 0, 1e-2);
  EXPECT_EQ(same.within_11_25, 1);
  EXPECT_EQ(same.within_22_5, 1);
  EXPECT_EQ(same.within_30, 1);
  Tensor neg = t;
  neg *= -1.0f;
  NormalScores opp = SurfaceNormalMetrics(neg, t);
  EXPECT_NEAR(opp.mean_degrees, 180, 1e-2);
  EXPECT_NEAR(opp.median_degrees, 180, 1e-2);
  EXPECT_EQ(opp.within_30, 0);
}

TEST(NormalMetricsTest, MatchesArccosOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 1 + trial % 8, w = 1 + (trial * 3) % 8;
    Tensor p = RandomUnitNormals({1, 3, h, w}, rng);
    Tensor t = RandomUnitNormals({1, 3, h, w}, rng);
    std::vector<double> ang;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double dot = 0;
        for (int c = 0; c < 3; ++c) dot += double(p.at(0, c, i, j)) * t.at(0, c, i, j);
        ang.push_back(std::acos(std::clamp(dot, -1.0, 1.0)) * 180 / std::numbers::pi);
      }
    double mean = 0;
    int f1 = 0, f2 = 0, f3 = 0;
    for (double a : ang) {
      mean += a / ang.size();
      f1 += a < 11.25;
      f2 += a < 22.5;
      f3 += a < 30;
    }
    std::sort(ang.begin(), ang.end());
    const std::size_t n = ang.size();
    const double median = n % 2 ? ang[n / 2] : (ang[n / 2 - 1] + ang[n / 2]) / 2;
    const NormalScores s = SurfaceNormalMetrics(p, t);
    EXPECT_NEAR(s.mean_degrees, mean, 1e-4);
    EXPECT_NEAR(s.median_degrees, median, 1e-4);
    EXPECT_NEAR(s.within_11_25, double(f1) / n, 1e-12);
    EXPECT_NEAR(s.within_22_5, double(f2) / n, 1e-12);
    EXPECT_NEAR(s.within_30, double(f3) / n, 1e-12);
  }
}

TEST(NormalMetricsTest, RejectsNonUnitVectors) {
  Tensor p({1, 3, 1, 1}), t({1, 3, 1, 1});
  p[2] = 1.01f;
  t[2] = 1.0f;
  EXPECT_THROW(SurfaceNormalMetrics(p, t), Error);
}

TEST(SegmentationMetricsTest, PerfectAndConstantPredictions) {
  LabelTensor target({1, 2, 2}, std::vector<std::int32_t>{0, 1, 0, 1});
  SegmentationScores perfect = SegmentationMetrics(target, target, 2);
  EXPECT_EQ(perfect.miou, 1.0);
  EXPECT_EQ(perfect.pixel_accuracy, 1.0);
  LabelTensor constant({1, 2, 2}, 0);
  SegmentationScores s = SegmentationMetrics(constant, target, 2);
  EXPECT_DOUBLE_EQ(s.pixel_accuracy, 0.5);
  EXPECT_DOUBLE_EQ(s.miou, 0.25);
}

TEST(SegmentationMetricsTest, MatchesConfusionMatrixOracle) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + trial % 3;
    LabelTensor p({1, 8, 8}), t({1, 8, 8});
    for (std::size_t i = 0; i < t.size(); ++i) {
      p.values[i] = rng() % k;
      t.values[i] = static_cast<int>(rng() % (k + 1)) - 1;
    }
    t.values[0] = 0;
    const SegmentationScores got = SegmentationMetrics(p, t, k);
    const SegmentationScores want = ConfusionOracle(p, t, k);
    EXPECT_NEAR(got.miou, want.miou, 1e-6);
    EXPECT_NEAR(got.pixel_accuracy, want.pixel_accuracy, 1e-6);
  }
}

TEST(SimilarityTest, ReflexiveAndSymmetric) {
  std::mt19937_64 rng(10);
  for (SimilarityKind kind : {SimilarityKind::kSsim, SimilarityKind::kMsSsim}) {
    SimilarityMeasure m;
    m.kind = kind;
    const int size = MinimumSpatialSize(m) + 3;
    for (int trial = 0; trial < 5; ++trial) {
      Tensor a = Tensor::RandomNormal({2, 3, size, size}, rng);
      Tensor b = Tensor::RandomNormal({2, 3, size, size}, rng);
      EXPECT_NEAR(Similarity(a, a, m), 1.0, 1e-6);
      const double ab = Similarity(a, b, m), ba = Similarity(b, a, m);
      EXPECT_NEAR(ab, ba, 1e-6);
      EXPECT_GE(ab, -1.0);
      EXPECT_LE(ab, 1.0);
    }
  }
}

TEST(SimilarityTest, ConstantZeroVersusConstantOne) {
  Tensor a({1, 1, 16, 16}, 0.0f), b({1, 1, 16, 16}, 1.0f);
  const double c1 = 1e-4;
  EXPECT_NEAR(Similarity(a, b, {}), c1 / (1 + c1), 1e-9);
}

TEST(SimilarityTest, MatchesSingleWindowFormula) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = Tensor::RandomNormal({1, 11, 11}, rng);
    Tensor b = Tensor::RandomNormal({1, 11, 11}, rng);
    for (std::size_t i = 0; i < a.size(); ++i) b[i] += 0.5f * a[i];
    EXPECT_NEAR(Similarity(a, b, {}), SingleWindowSsim(a, b), 1e-6);
  }
}

TEST(SimilarityTest, SsimGradientMatchesFiniteDifferences) {
  CheckSimilarityGradient({2, 2, 13, 14}, {}, 12);
}

TEST(SimilarityTest, MsSsimGradientMatchesFiniteDifferences) {
  SimilarityMeasure m;
  m.kind = SimilarityKind::kMsSsim;
  CheckSimilarityGradient({1, 2, 45, 46}, m, 13);
}

TEST(SimilarityTest, SmallMapsAskForSmallerWindow) {
  Tensor a({1, 4, 8, 8});
  try {
    Similarity(a, a, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("reduce window_size"), std::string::npos);
  }
  SimilarityMeasure small;
  small.window_size = 7;
  EXPECT_NEAR(Similarity(a, a, small), 1.0, 1e-6);
}

TEST(TaskPrivacyLossTest, PairCounting) {
  std::mt19937_64 rng(14);
  Tensor f = Tensor::RandomNormal({1, 2, 12, 12}, rng);
  EXPECT_EQ(TaskPrivacyLoss({f}, {}), 0.0);
  EXPECT_NEAR(TaskPrivacyLoss({f, f}, {}), 2.0, 1e-6);
}

TEST(TaskPrivacyLossTest, EqualsTwiceThePairwiseSumAndIgnoresOrder) {
  std::mt19937_64 rng(15);
  std::vector<Tensor> f;
  for (int i = 0; i < 3; ++i) f.push_back(Tensor::RandomNormal({2, 2, 12, 12}, rng));
  const double pairs = Similarity(f[0], f[1], {}) + Similarity(f[0], f[2], {}) +
                       Similarity(f[1], f[2], {});
  EXPECT_NEAR(TaskPrivacyLoss(f, {}), 2 * pairs, 1e-6);
  std::vector<Tensor> shuffled = {f[2], f[0], f[1]};
  EXPECT_NEAR(TaskPrivacyLoss(shuffled, {}), TaskPrivacyLoss(f, {}), 1e-9);
}

TEST(TaskPrivacyLossTest, GradientSumsPairContributions) {
  std::mt19937_64 rng(16);
  std::vector<Tensor> f;
  for (int i = 0; i < 3; ++i) f.push_back(Tensor::RandomNormal({1, 1, 12, 12}, rng));
  std::vector<Tensor> grads;
  TaskPrivacyLoss(f, {}, &grads);
  Tensor g01a, g01b, g02a, g02b;
  Similarity(f[0], f[1], {}, &g01a, &g01b);
  Similarity(f[0], f[2], {}, &g02a, &g02b);
  for (std::size_t i = 0; i < f[0].size(); ++i)
    EXPECT_NEAR(grads[0][i], 2 * (g01a[i] + g02a[i]), 1e-6);
}

TEST(TaskPrivacyLossTest, ShapeMismatchIsConfigError) {
  Tensor a({1, 1, 12, 12}), b({1, 2, 12, 12});
  EXPECT_THROW(TaskPrivacyLoss({a, b}, {}), Error);
}

TEST(CombinedLossTest, WeightsAndOmega) {
  std::vector<double> losses = {0.25, 0.75};
  LossWeights w;
  w.omega = 0;
  EXPECT_EQ(CombinedLoss(losses, 5.0, w), 1.0);
  w.omega = 0.001;
  EXPECT_NEAR(CombinedLoss(losses, 2.0, w), 1.002, 1e-12);
  EXPECT_EQ(CombinedLoss(std::vector<double>{0, 0}, 0, w), 0.0);
  w.per_task = {2.0, 0.0};
  EXPECT_NEAR(CombinedLoss(losses, 0.0, w), 0.5, 1e-12);
  w.omega = -1;
  EXPECT_THROW(CombinedLoss(losses, 0.0, w), Error);
}

TEST(CombinedLossTest, AffineInOmega) {
  std::vector<double> losses = {0.3, 1.1};
  LossWeights w0, w1, w2;
  w0.omega = 0;
  w1.omega = 0.5;
  w2.omega = 1.0;
  const double l0 = CombinedLoss(losses, 0.8, w0), l1 = CombinedLoss(losses, 0.8, w1),
               l2 = CombinedLoss(losses, 0.8, w2);
  EXPECT_NEAR(l1 - l0, l2 - l1, 1e-12);
}

}  // namespace
}  // namespace mtsplit::objectives
