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

#include "mtsplit/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "mtsplit/error.h"

namespace mtsplit {

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    Require(d >= 0, ErrorKind::kConfig, "negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ")";
  return out.str();
}

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kData: return "data";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kCalibration: return "calibration";
    case ErrorKind::kProtocol: return "protocol";
    case ErrorKind::kCorruption: return "corruption";
    case ErrorKind::kIncomplete: return "incomplete";
    case ErrorKind::kBudgetExhausted: return "budget-exhausted";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kSession: return "session";
  }
  return "unknown";
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), values_(NumElements(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  Require(values_.size() == NumElements(shape_), ErrorKind::kConfig,
          "tensor buffer of " + std::to_string(values_.size()) +
              " elements does not match shape " + ShapeToString(shape_));
}

std::size_t Tensor::SampleSize() const {
  if (shape_.empty() || shape_[0] == 0) return 0;
  return values_.size() / static_cast<std::size_t>(shape_[0]);
}

Tensor Tensor::Reshaped(Shape shape) const {
  return Tensor(std::move(shape), values_);
}

Tensor Tensor::Slice(int begin, int end) const {
  Require(ndim() >= 1 && begin >= 0 && begin <= end && end <= shape_[0],
          ErrorKind::kConfig, "slice out of range");
  Shape shape = shape_;
  shape[0] = end - begin;
  const std::size_t stride = SampleSize();
  std::vector<float> values(values_.begin() + begin * stride,
                            values_.begin() + end * stride);
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::Gather(std::span<const int> rows) const {
  Shape shape = shape_;
  shape[0] = static_cast<int>(rows.size());
  Tensor out(shape);
  const std::size_t stride = SampleSize();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Require(rows[i] >= 0 && rows[i] < shape_[0], ErrorKind::kConfig,
            "gather index out of range");
    std::copy_n(values_.begin() + rows[i] * stride, stride,
                out.values_.begin() + i * stride);
  }
  return out;
}

void Tensor::SetSample(int n, const Tensor& sample) {
  const std::size_t stride = SampleSize();
  Require(sample.size() == stride, ErrorKind::kConfig,
          "sample size mismatch in SetSample");
  std::copy(sample.values_.begin(), sample.values_.end(),
            values_.begin() + n * stride);
}

void Tensor::Fill(float value) { std::fill(values_.begin(), values_.end(), value); }

Tensor& Tensor::operator+=(const Tensor& other) {
  Require(other.values_.size() == values_.size(), ErrorKind::kConfig,
          "shape mismatch in +=: " + ShapeToString(shape_) + " vs " +
              ShapeToString(other.shape_));
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Tensor& Tensor::operator*=(float scale) {
  for (float& v : values_) v *= scale;
  return *this;
}

double Tensor::SquaredNorm() const {
  double s = 0.0;
  for (float v : values_) s += static_cast<double>(v) * v;
  return s;
}

bool Tensor::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](float v) { return std::isfinite(v); });
}

Tensor Tensor::Stack(std::span<const Tensor> samples) {
  Require(!samples.empty(), ErrorKind::kConfig, "cannot stack zero tensors");
  Shape shape = {static_cast<int>(samples.size())};
  for (int d : samples[0].shape()) shape.push_back(d);
  Tensor out(shape);
  const std::size_t stride = samples[0].size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Require(samples[i].shape() == samples[0].shape(), ErrorKind::kConfig,
            "stack shape mismatch");
    std::copy(samples[i].values_.begin(), samples[i].values_.end(),
              out.values_.begin() + i * stride);
  }
  return out;
}

Tensor Tensor::RandomNormal(Shape shape, std::mt19937_64& rng, double stddev) {
  Tensor out(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (float& v : out.values_) v = static_cast<float>(dist(rng));
  return out;
}

Tensor Tensor::RandomUniform(Shape shape, std::mt19937_64& rng, double lo,
                             double hi) {
  Tensor out(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (float& v : out.values_) v = static_cast<float>(dist(rng));
  return out;
}

LabelTensor::LabelTensor(Shape s, std::vector<std::int32_t> v)
    : shape(std::move(s)), values(std::move(v)) {
  Require(values.size() == NumElements(shape), ErrorKind::kConfig,
          "label buffer does not match shape " + ShapeToString(shape));
}

LabelTensor LabelTensor::Gather(std::span<const int> rows) const {
  Shape s = shape;
  s[0] = static_cast<int>(rows.size());
  LabelTensor out(s);
  const std::size_t stride = SampleSize();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Require(rows[i] >= 0 && rows[i] < shape[0], ErrorKind::kConfig,
            "gather index out of range");
    std::copy_n(values.begin() + rows[i] * stride, stride, out.values.begin() + i * stride);
  }
  return out;
}

double MaxAbsDiff(const Tensor& a, const Tensor& b) {
  Require(a.shape() == b.shape(), ErrorKind::kConfig,
          "MaxAbsDiff shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(static_cast<double>(a[i]) - b[i]));
  }
  return m;
}

}  // namespace mtsplit
