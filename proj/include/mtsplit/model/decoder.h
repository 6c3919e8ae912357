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

#ifndef MTSPLIT_MODEL_DECODER_H_
#define MTSPLIT_MODEL_DECODER_H_

#include <random>

#include "mtsplit/nn/module.h"
#include "mtsplit/tensor.h"

namespace mtsplit::model {

struct DecoderConfig {
  int width = 32;
  bool sigmoid_output = true;  // images in [0, 1]
};

// Upsampling network from a per-sample feature shape (C, h, w) back to an
// image shape (C', H, W). H/h must equal W/w and be a power of two. With
// h == H the network reduces to channel-mapping convolutions.
nn::Sequential BuildDecoder(const Shape& feature_shape, const Shape& output_shape,
                            const DecoderConfig& config, std::mt19937_64& rng);

}  // namespace mtsplit::model

#endif  // MTSPLIT_MODEL_DECODER_H_
