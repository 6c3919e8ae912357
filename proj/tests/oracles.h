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

#ifndef MTSPLIT_TESTS_ORACLES_H_
#define MTSPLIT_TESTS_ORACLES_H_

// Scalar-loop references for losses, metrics and SSIM, written straight from
// the definitions and sharing no code with the library.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mtsplit/objectives/losses.h"
#include "mtsplit/objectives/metrics.h"
#include "mtsplit/tensor.h"

namespace mtsplit::testing {

using objectives::kIgnoreLabel;
using objectives::SegmentationScores;

inline double NaiveCrossEntropy(const Tensor& s, const LabelTensor& y) {
  const int n = s.dim(0), k = s.dim(1), h = s.dim(2), w = s.dim(3);
  double total = 0;
  int count = 0;
  for (int b = 0; b < n; ++b)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const int label = y.values[(b * h + i) * w + j];
        if (label == kIgnoreLabel) continue;
        double z = 0;
        for (int c = 0; c < k; ++c) z += std::exp(static_cast<double>(s.at(b, c, i, j)));
        total += -std::log(std::exp(static_cast<double>(s.at(b, label, i, j))) / z);
        ++count;
      }
  return total / count;
}

// SSIM of a single 11x11 window, evaluated straight from the definition.
inline double SingleWindowSsim(const Tensor& a, const Tensor& b) {
  double g1[11], gsum = 0;
  for (int i = 0; i < 11; ++i) {
    g1[i] = std::exp(-(i - 5.0) * (i - 5.0) / (2 * 1.5 * 1.5));
    gsum += g1[i];
  }
  double lo = a[0], hi = a[0];
  for (std::size_t i = 0; i < a.size(); ++i) {
    lo = std::min({lo, double(a[i]), double(b[i])});
    hi = std::max({hi, double(a[i]), double(b[i])});
  }
  const double c1 = std::pow(0.01 * (hi - lo), 2), c2 = std::pow(0.03 * (hi - lo), 2);
  double ma = 0, mb = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      const double wgt = g1[i] * g1[j] / (gsum * gsum);
      ma += wgt * a[i * 11 + j];
      mb += wgt * b[i * 11 + j];
    }
  double va = 0, vb = 0, cov = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      const double wgt = g1[i] * g1[j] / (gsum * gsum);
      const double da = a[i * 11 + j] - ma, db = b[i * 11 + j] - mb;
      va += wgt * da * da;
      vb += wgt * db * db;
      cov += wgt * da * db;
    }
  return (2 * ma * mb + c1) * (2 * cov + c2) /
         ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

inline SegmentationScores ConfusionOracle(const LabelTensor& p, const LabelTensor& t, int k) {
  std::vector<std::vector<double>> m(k, std::vector<double>(k, 0));
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t.values[i] != kIgnoreLabel) m[t.values[i]][p.values[i]] += 1;
  double diag = 0, total = 0, iou = 0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    double row = 0, col = 0;
    for (int d = 0; d < k; ++d) {
      row += m[c][d];
      col += m[d][c];
      total += m[c][d];
    }
    diag += m[c][c];
    if (row > 0) {
      iou += m[c][c] / (row + col - m[c][c]);
      ++present;
    }
  }
  return {iou / present, diag / total};
}

inline Tensor RandomUnitNormals(Shape shape, std::mt19937_64& rng) {
  Tensor t = Tensor::RandomNormal(shape, rng);
  const int n = shape[0], h = shape[2], w = shape[3];
  for (int b = 0; b < n; ++b)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double s = 0;
        for (int c = 0; c < 3; ++c) s += t.at(b, c, i, j) * t.at(b, c, i, j);
        for (int c = 0; c < 3; ++c) t.at(b, c, i, j) /= static_cast<float>(std::sqrt(s));
      }
  return t;
}

}  // namespace mtsplit::testing

#endif  // MTSPLIT_TESTS_ORACLES_H_
