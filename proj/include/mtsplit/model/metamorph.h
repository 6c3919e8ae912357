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

#ifndef MTSPLIT_MODEL_METAMORPH_H_
#define MTSPLIT_MODEL_METAMORPH_H_

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mtsplit/nn/layers.h"
#include "mtsplit/nn/module.h"

namespace mtsplit::model {

enum class Crossing {
  kCross,     // group i's attention scales group (i + 1) mod k
  kStraight,  // group i's attention scales group i (grouped squeeze-excitation)
};

Crossing ParseCrossing(const std::string& name);
std::string CrossingName(Crossing crossing);

struct MetamorphConfig {
  int k = 2;
  int reduction_ratio = 4;
  Crossing crossing = Crossing::kCross;
};

// Throws kConfig unless `channels` splits into k groups with a bottleneck
// width of at least one.
void ValidateMetamorphConfig(const MetamorphConfig& config, int channels);

// Per-task feature transform placed after the shared encoder. Shape
// preserving (N, C, H, W) -> (N, C, H, W):
//   1. split channels into k groups;
//   2. per group: global average pool -> 1x1 conv -> linear reduce -> relu ->
//      linear expand -> sigmoid, giving one attention vector per group;
//   3. attention of group i rescales the channels of group TargetGroup(i);
//   4. a final 1x1 conv over the re-concatenated channels.
class Metamorph final : public nn::ClonableModule<Metamorph> {
 public:
  Metamorph(const MetamorphConfig& config, int channels, std::mt19937_64& rng);

  Tensor Forward(const Tensor& input) override;
  Tensor Backward(const Tensor& grad_output) override;
  Shape OutputShape(const Shape& input) const override;
  std::string Describe() const override;
  void CollectParameters(const std::string& prefix,
                         std::vector<nn::Parameter*>& out) override;

  const MetamorphConfig& config() const { return config_; }
  int channels() const { return channels_; }
  int group_width() const { return channels_ / config_.k; }
  int bottleneck_width() const;
  int TargetGroup(int source) const;

  // Test hooks: replace the sigmoid output of one group (or all groups) with
  // a constant. Overridden groups pass no gradient into their attention path.
  void SetAttentionOverride(std::optional<float> value);
  void SetGroupAttentionOverride(int group, std::optional<float> value);

  // Attention vectors (N, C/k) from the last Forward, indexed by source group.
  const std::vector<Tensor>& last_attention() const { return attention_; }
  // Stage-3 output (before the final 1x1 conv) from the last Forward.
  const Tensor& last_rescaled() const { return rescaled_; }

 private:
  struct AttentionBranch {
    nn::GlobalAvgPool pool;
    nn::Conv2d conv;
    nn::Linear reduce;
    nn::ReLU relu;
    nn::Linear expand;
    nn::Sigmoid gate;
  };

  MetamorphConfig config_;
  int channels_;
  std::vector<AttentionBranch> branches_;
  nn::Conv2d mix_;
  std::vector<std::optional<float>> overrides_;

  Tensor input_;
  Tensor rescaled_;
  std::vector<Tensor> attention_;
};

}  // namespace mtsplit::model

#endif  // MTSPLIT_MODEL_METAMORPH_H_
