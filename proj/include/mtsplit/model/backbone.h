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

#ifndef MTSPLIT_MODEL_BACKBONE_H_
#define MTSPLIT_MODEL_BACKBONE_H_

#include <random>
#include <string>
#include <vector>

#include "mtsplit/nn/module.h"
#include "mtsplit/tensor.h"

namespace mtsplit::model {

enum class BlockKind {
  kConv,       // 3x3 conv -> group norm -> relu
  kPointwise,  // 1x1 conv -> group norm -> relu
};

BlockKind ParseBlockKind(const std::string& name);
std::string BlockKindName(BlockKind kind);

struct BlockDescriptor {
  BlockKind kind = BlockKind::kConv;
  int channels = 16;
  int stride = 1;
};

struct BackboneSpec {
  std::vector<BlockDescriptor> blocks;
  int split_index = 1;
  Shape input_shape = {3, 32, 32};  // (channels, height, width)
};

// Desk-scale default: 32x32 RGB in, four conv blocks, split after block 2.
BackboneSpec DefaultBackboneSpec();

// Throws kConfig naming the valid split range when the spec is invalid.
void ValidateBackboneSpec(const BackboneSpec& spec);

// Group count used by every normalization layer for `channels`.
int NormGroups(int channels);

// One conv-norm-relu block as a Sequential.
nn::Sequential MakeBlock(const BlockDescriptor& block, int in_channels,
                         std::mt19937_64& rng);

// The unsplit network: one Sequential entry per block.
nn::Sequential BuildBackbone(const BackboneSpec& spec, std::mt19937_64& rng);

struct SplitBackbone {
  nn::Sequential producer;
  nn::Sequential consumer;
  Shape feature_shape;  // producer output, per sample
};

// Builds the unsplit network and cuts it at spec.split_index, so the same
// rng state yields halves whose composition equals BuildBackbone.
SplitBackbone BuildSplitBackbone(const BackboneSpec& spec, std::mt19937_64& rng);

// Per-sample shape after the first `count` blocks.
Shape ShapeAfterBlocks(const BackboneSpec& spec, int count);

}  // namespace mtsplit::model

#endif  // MTSPLIT_MODEL_BACKBONE_H_
