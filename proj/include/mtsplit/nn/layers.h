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

#ifndef MTSPLIT_NN_LAYERS_H_
#define MTSPLIT_NN_LAYERS_H_

#include <random>
#include <string>
#include <vector>

#include "mtsplit/nn/module.h"

namespace mtsplit::nn {

// 2-D convolution with square kernel and symmetric zero padding of
// kernel/2 (same-size output at stride 1).
class Conv2d final : public ClonableModule<Conv2d> {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride,
         std::mt19937_64& rng, bool bias = true);

  Tensor Forward(const Tensor& input) override;
  Tensor Backward(const Tensor& grad_output) override;
  Shape OutputShape(const Shape& input) const override;
  std::string Describe() const override;
  void CollectParameters(const std::string& prefix,
                         std::vector<Parameter*>& out) override;

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  int OutSize(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }
  bool Pointwise() const { return kernel_ == 1 && stride_ == 1; }

  int in_channels_;
  int out_channels_;
  int kernel_;
  int stride_;
  int pad_;
  bool has_bias_;
  Parameter weight_;
  Parameter bias_;
  Shape input_shape_;
  std::vector<Tensor> columns_;  // per-sample im2col cache
};

class GroupNorm final : public ClonableModule<GroupNorm> {
 public:
  GroupNorm(int groups, int channels, float eps = 1e-5f);

  Tensor Forward(const Tensor& input) override;
  Tensor Backward(const Tensor& grad_output) override;
  Shape OutputShape(const Shape& input) const override { return input; }
  std::string Describe() const override;
  void CollectParameters(const std::string& prefix,
                         std::vector<Parameter*>& out) override;

 private:
  int groups_;
  int channels_;
  float eps_;
  Parameter gamma_;
  Parameter beta_;
  Tensor normalized_;
  std::vector<float> inv_std_;
};

class ReLU final : public ClonableModule<ReLU> {
 public:
  Tensor Forward(const Tensor& input) override;
  Tensor Backward(const Tensor& grad_output) override;
  Shape OutputShape(const Shape& input) const override { return input; }
  std::string Describe() const override { return "relu"; }

 private:
  Tensor output_;
};

class Sigmoid final : public ClonableModule<Sigmoid> {
 public:
  Tensor Forward(const Tensor& input) override;
  Tensor Backward(const Tensor& grad_output) override;
  Shape OutputShape(const Shape& input) const override { return input; }
  std::string Describe() const override { return "sigmoid"; }

 private:
  Tensor output_;
};

// (N, C, H, W) -> (N, C)
class GlobalAvgPool final : public ClonableModule<GlobalAvgPool> {
 public:
  Tensor Forward(const Tensor& input) override;
  Tensor Backward(const Tensor& grad_output) override;
  Shape OutputShape(const Shape& input) const override { return {input[0]}; }
  std::string Describe() const override { return "global_avg_pool"; }

 private:
  Shape input_shape_;
};

// (N, in) -> (N, out)
class Linear final : public ClonableModule<Linear> {
 public:
  Linear(int in_features, int out_features, std::mt19937_64& rng);

  Tensor Forward(const Tensor& input) override;
  Tensor Backward(const Tensor& grad_output) override;
  Shape OutputShape(const Shape& input) const override;
  std::string Describe() const override;
  void CollectParameters(const std::string& prefix,
                         std::vector<Parameter*>& out) override;

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  int in_features_;
  int out_features_;
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
};

// Nearest-neighbour upsampling by an integer factor.
class Upsample final : public ClonableModule<Upsample> {
 public:
  explicit Upsample(int factor);

  Tensor Forward(const Tensor& input) override;
  Tensor Backward(const Tensor& grad_output) override;
  Shape OutputShape(const Shape& input) const override;
  std::string Describe() const override;

 private:
  int factor_;
  Shape input_shape_;
};

}  // namespace mtsplit::nn

#endif  // MTSPLIT_NN_LAYERS_H_
