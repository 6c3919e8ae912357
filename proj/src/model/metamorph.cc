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

#include "mtsplit/model/metamorph.h"

#include <algorithm>

#include "mtsplit/error.h"

namespace mtsplit::model {
namespace {

// Copies channels [first, first + count) of an NCHW tensor.
Tensor ChannelSlice(const Tensor& x, int first, int count) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor out({n, count, h, w});
  for (int s = 0; s < n; ++s) {
    std::copy_n(x.data() + (static_cast<std::size_t>(s) * c + first) * hw,
                count * hw, out.data() + static_cast<std::size_t>(s) * count * hw);
  }
  return out;
}

void AddChannelSlice(Tensor& dst, const Tensor& src, int first) {
  const int n = dst.dim(0), c = dst.dim(1);
  const int count = src.dim(1);
  const std::size_t hw = static_cast<std::size_t>(dst.dim(2)) * dst.dim(3);
  for (int s = 0; s < n; ++s) {
    float* d = dst.data() + (static_cast<std::size_t>(s) * c + first) * hw;
    const float* p = src.data() + static_cast<std::size_t>(s) * count * hw;
    for (std::size_t i = 0; i < count * hw; ++i) d[i] += p[i];
  }
}

}  // namespace

Crossing ParseCrossing(const std::string& name) {
  if (name == "cross" || name == "CROSS") return Crossing::kCross;
  if (name == "straight" || name == "STRAIGHT") return Crossing::kStraight;
  Fail(ErrorKind::kConfig,
       "unknown crossing '" + name + "' (expected cross or straight)");
}

std::string CrossingName(Crossing crossing) {
  return crossing == Crossing::kCross ? "cross" : "straight";
}

void ValidateMetamorphConfig(const MetamorphConfig& config, int channels) {
  Require(config.k >= 1, ErrorKind::kConfig, "metamorph.k must be >= 1");
  Require(config.reduction_ratio >= 1, ErrorKind::kConfig,
          "metamorph.reduction_ratio must be >= 1");
  Require(channels > 0 && channels % config.k == 0, ErrorKind::kConfig,
          "encoder output channels (" + std::to_string(channels) +
              ") not divisible by metamorph.k (" + std::to_string(config.k) + ")");
  Require(channels / (config.k * config.reduction_ratio) >= 1, ErrorKind::kConfig,
          "metamorph bottleneck width channels/(k*reduction_ratio) = " +
              std::to_string(channels) + "/(" + std::to_string(config.k) + "*" +
              std::to_string(config.reduction_ratio) + ") is below 1");
}

Metamorph::Metamorph(const MetamorphConfig& config, int channels,
                     std::mt19937_64& rng)
    : config_(config),
      channels_(channels),
      mix_((ValidateMetamorphConfig(config, channels), channels), channels, 1, 1,
           rng),
      overrides_(static_cast<std::size_t>(config.k)) {
  const int width = group_width();
  const int bottleneck = bottleneck_width();
  branches_.reserve(static_cast<std::size_t>(config_.k));
  for (int g = 0; g < config_.k; ++g) {
    branches_.push_back(AttentionBranch{
        nn::GlobalAvgPool(), nn::Conv2d(width, width, 1, 1, rng),
        nn::Linear(width, bottleneck, rng), nn::ReLU(),
        nn::Linear(bottleneck, width, rng), nn::Sigmoid()});
  }
}

int Metamorph::bottleneck_width() const {
  return channels_ / (config_.k * config_.reduction_ratio);
}

int Metamorph::TargetGroup(int source) const {
  return config_.crossing == Crossing::kCross ? (source + 1) % config_.k : source;
}

Shape Metamorph::OutputShape(const Shape& input) const {
  Require(input.size() == 3 && input[0] == channels_, ErrorKind::kConfig,
          "metamorph expects " + std::to_string(channels_) + " channels, got " +
              ShapeToString(input));
  return input;
}

std::string Metamorph::Describe() const {
  return "metamorph(" + CrossingName(config_.crossing) + ",k=" +
         std::to_string(config_.k) + ",r=" + std::to_string(config_.reduction_ratio) +
         ",c=" + std::to_string(channels_) + ")";
}

void Metamorph::CollectParameters(const std::string& prefix,
                                  std::vector<nn::Parameter*>& out) {
  for (int g = 0; g < config_.k; ++g) {
    const std::string p = prefix + "group" + std::to_string(g) + ".";
    AttentionBranch& b = branches_[g];
    b.conv.CollectParameters(p + "conv.", out);
    b.reduce.CollectParameters(p + "reduce.", out);
    b.expand.CollectParameters(p + "expand.", out);
  }
  mix_.CollectParameters(prefix + "mix.", out);
}

void Metamorph::SetAttentionOverride(std::optional<float> value) {
  std::fill(overrides_.begin(), overrides_.end(), value);
}

void Metamorph::SetGroupAttentionOverride(int group, std::optional<float> value) {
  Require(group >= 0 && group < config_.k, ErrorKind::kConfig,
          "attention override group out of range");
  overrides_[group] = value;
}

Tensor Metamorph::Forward(const Tensor& input) {
  Require(input.ndim() == 4 && input.dim(1) == channels_, ErrorKind::kConfig,
          "metamorph expects (N, " + std::to_string(channels_) + ", H, W), got " +
              ShapeToString(input.shape()));
  input_ = input;
  const int n = input.dim(0), h = input.dim(2), w = input.dim(3);
  const int width = group_width();
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  attention_.assign(static_cast<std::size_t>(config_.k), Tensor());
  rescaled_ = Tensor(input.shape());
  for (int g = 0; g < config_.k; ++g) {
    Tensor a;
    if (overrides_[g].has_value()) {
      a = Tensor({n, width}, *overrides_[g]);
    } else {
      AttentionBranch& b = branches_[g];
      Tensor pooled = b.pool.Forward(ChannelSlice(input, g * width, width));
      Tensor mixed = b.conv.Forward(pooled.Reshaped({n, width, 1, 1}));
      a = b.gate.Forward(b.expand.Forward(
          b.relu.Forward(b.reduce.Forward(mixed.Reshaped({n, width})))));
    }
    const int t = TargetGroup(g);
    for (int s = 0; s < n; ++s) {
      for (int c = 0; c < width; ++c) {
        const std::size_t base = (static_cast<std::size_t>(s) * channels_ + t * width + c) * hw;
        const float scale = a[static_cast<std::size_t>(s) * width + c];
        for (std::size_t i = 0; i < hw; ++i) rescaled_[base + i] = input[base + i] * scale;
      }
    }
    attention_[g] = std::move(a);
  }
  return mix_.Forward(rescaled_);
}

Tensor Metamorph::Backward(const Tensor& grad_output) {
  const Tensor grad_rescaled = mix_.Backward(grad_output);
  const int n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
  const int width = group_width();
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor grad_input(input_.shape());
  for (int g = 0; g < config_.k; ++g) {
    const int t = TargetGroup(g);
    const Tensor& a = attention_[g];
    Tensor grad_attention({n, width});
    for (int s = 0; s < n; ++s) {
      for (int c = 0; c < width; ++c) {
        const std::size_t base = (static_cast<std::size_t>(s) * channels_ + t * width + c) * hw;
        const float scale = a[static_cast<std::size_t>(s) * width + c];
        double da = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
          grad_input[base + i] += grad_rescaled[base + i] * scale;
          da += static_cast<double>(grad_rescaled[base + i]) * input_[base + i];
        }
        grad_attention[static_cast<std::size_t>(s) * width + c] = static_cast<float>(da);
      }
    }
    if (overrides_[g].has_value()) continue;
    AttentionBranch& b = branches_[g];
    Tensor d = b.reduce.Backward(
        b.relu.Backward(b.expand.Backward(b.gate.Backward(grad_attention))));
    d = b.conv.Backward(d.Reshaped({n, width, 1, 1}));
    AddChannelSlice(grad_input, b.pool.Backward(d.Reshaped({n, width})), g * width);
  }
  return grad_input;
}

}  // namespace mtsplit::model
