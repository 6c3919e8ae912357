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

#include "mtsplit/model/backbone.h"

#include <numeric>

#include "mtsplit/error.h"
#include "mtsplit/nn/layers.h"

namespace mtsplit::model {

BlockKind ParseBlockKind(const std::string& name) {
  if (name == "conv") return BlockKind::kConv;
  if (name == "pointwise") return BlockKind::kPointwise;
  Fail(ErrorKind::kConfig,
       "unknown block kind '" + name + "' (expected conv or pointwise)");
}

std::string BlockKindName(BlockKind kind) {
  return kind == BlockKind::kConv ? "conv" : "pointwise";
}

BackboneSpec DefaultBackboneSpec() {
  BackboneSpec spec;
  spec.blocks = {{BlockKind::kConv, 16, 1},
                 {BlockKind::kConv, 32, 2},
                 {BlockKind::kConv, 64, 2},
                 {BlockKind::kConv, 64, 2}};
  spec.split_index = 2;
  spec.input_shape = {3, 32, 32};
  return spec;
}

int NormGroups(int channels) { return std::gcd(channels, 8); }

void ValidateBackboneSpec(const BackboneSpec& spec) {
  const int n = static_cast<int>(spec.blocks.size());
  Require(n >= 2, ErrorKind::kConfig,
          "backbone needs at least 2 blocks to be split, got " + std::to_string(n));
  Require(spec.split_index > 0 && spec.split_index < n, ErrorKind::kConfig,
          "backbone.split_index " + std::to_string(spec.split_index) +
              " out of range: valid split indices are 1.." + std::to_string(n - 1));
  Require(spec.input_shape.size() == 3 && spec.input_shape[0] > 0 &&
              spec.input_shape[1] > 0 && spec.input_shape[2] > 0,
          ErrorKind::kConfig, "backbone.input_shape must be (channels, height, width)");
  Shape s = spec.input_shape;
  for (int i = 0; i < n; ++i) {
    const BlockDescriptor& b = spec.blocks[i];
    Require(b.channels > 0, ErrorKind::kConfig,
            "backbone block " + std::to_string(i) + " has non-positive channels");
    Require(b.stride == 1 || b.stride == 2, ErrorKind::kConfig,
            "backbone block " + std::to_string(i) + " stride must be 1 or 2");
    const int k = b.kind == BlockKind::kConv ? 3 : 1;
    const int pad = k / 2;
    s = {b.channels, (s[1] + 2 * pad - k) / b.stride + 1,
         (s[2] + 2 * pad - k) / b.stride + 1};
    Require(s[1] >= 1 && s[2] >= 1, ErrorKind::kConfig,
            "backbone block " + std::to_string(i) + " reduces spatial size below 1");
  }
}

nn::Sequential MakeBlock(const BlockDescriptor& block, int in_channels,
                         std::mt19937_64& rng) {
  nn::Sequential seq;
  const int kernel = block.kind == BlockKind::kConv ? 3 : 1;
  seq.Emplace<nn::Conv2d>(in_channels, block.channels, kernel, block.stride, rng,
                          /*bias=*/false);
  seq.Emplace<nn::GroupNorm>(NormGroups(block.channels), block.channels);
  seq.Emplace<nn::ReLU>();
  return seq;
}

nn::Sequential BuildBackbone(const BackboneSpec& spec, std::mt19937_64& rng) {
  ValidateBackboneSpec(spec);
  nn::Sequential net;
  int channels = spec.input_shape[0];
  for (const BlockDescriptor& block : spec.blocks) {
    net.Add(std::make_unique<nn::Sequential>(MakeBlock(block, channels, rng)));
    channels = block.channels;
  }
  return net;
}

SplitBackbone BuildSplitBackbone(const BackboneSpec& spec, std::mt19937_64& rng) {
  SplitBackbone out;
  out.producer = BuildBackbone(spec, rng);
  out.consumer = out.producer.SplitAt(static_cast<std::size_t>(spec.split_index));
  out.feature_shape = out.producer.OutputShape(spec.input_shape);
  return out;
}

Shape ShapeAfterBlocks(const BackboneSpec& spec, int count) {
  ValidateBackboneSpec(spec);
  Require(count >= 0 && count <= static_cast<int>(spec.blocks.size()),
          ErrorKind::kConfig, "block count out of range");
  Shape s = spec.input_shape;
  for (int i = 0; i < count; ++i) {
    const BlockDescriptor& b = spec.blocks[i];
    const int k = b.kind == BlockKind::kConv ? 3 : 1;
    s = {b.channels, (s[1] + 2 * (k / 2) - k) / b.stride + 1,
         (s[2] + 2 * (k / 2) - k) / b.stride + 1};
  }
  return s;
}

}  // namespace mtsplit::model
