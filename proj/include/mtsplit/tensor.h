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

#ifndef MTSPLIT_TENSOR_H_
#define MTSPLIT_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mtsplit {

using Shape = std::vector<int>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Dense row-major float32 array. Images and feature maps use NCHW layout,
// flat activations use (N, features).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  float* data() { return values_.data(); }
  const float* data() const { return values_.data(); }
  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }
  std::vector<float>& storage() { return values_; }
  const std::vector<float>& storage() const { return values_; }

  float& operator[](std::size_t i) { return values_[i]; }
  float operator[](std::size_t i) const { return values_[i]; }

  // NCHW element access; no bounds checks beyond the debug assert.
  float& at(int n, int c, int h, int w) {
    return values_[Offset(n, c, h, w)];
  }
  float at(int n, int c, int h, int w) const {
    return values_[Offset(n, c, h, w)];
  }

  // Number of elements per leading-dimension entry.
  std::size_t SampleSize() const;

  Tensor Reshaped(Shape shape) const;
  // Rows [begin, end) of the leading dimension.
  Tensor Slice(int begin, int end) const;
  // Gathers the given leading-dimension rows in order.
  Tensor Gather(std::span<const int> rows) const;
  void SetSample(int n, const Tensor& sample);

  void Fill(float value);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(float scale);

  double SquaredNorm() const;
  bool AllFinite() const;

  static Tensor Stack(std::span<const Tensor> samples);
  static Tensor Zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor RandomNormal(Shape shape, std::mt19937_64& rng,
                             double stddev = 1.0);
  static Tensor RandomUniform(Shape shape, std::mt19937_64& rng, double lo,
                              double hi);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  std::size_t Offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) *
               shape_[3] +
           w;
  }

  Shape shape_;
  std::vector<float> values_;
};

// Integer labels: (N) class ids or (N, H, W) per-pixel ids.
struct LabelTensor {
  Shape shape;
  std::vector<std::int32_t> values;

  LabelTensor() = default;
  LabelTensor(Shape s, std::int32_t fill = 0)
      : shape(std::move(s)), values(NumElements(shape), fill) {}
  LabelTensor(Shape s, std::vector<std::int32_t> v);

  std::size_t size() const { return values.size(); }
  std::size_t SampleSize() const {
    return shape.empty() || shape[0] == 0 ? 0 : values.size() / shape[0];
  }
  LabelTensor Gather(std::span<const int> rows) const;
  friend bool operator==(const LabelTensor&, const LabelTensor&) = default;
};

// Largest absolute elementwise difference; shapes must match.
double MaxAbsDiff(const Tensor& a, const Tensor& b);

}  // namespace mtsplit

#endif  // MTSPLIT_TENSOR_H_
