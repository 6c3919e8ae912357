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

#include "mtsplit/model/decoder.h"

#include "mtsplit/error.h"
#include "mtsplit/model/backbone.h"
#include "mtsplit/nn/layers.h"

namespace mtsplit::model {

nn::Sequential BuildDecoder(const Shape& feature_shape, const Shape& output_shape,
                            const DecoderConfig& config, std::mt19937_64& rng) {
  Require(feature_shape.size() == 3 && output_shape.size() == 3, ErrorKind::kConfig,
          "decoder shapes must be (channels, height, width)");
  Require(config.width > 0, ErrorKind::kConfig, "decoder width must be positive");
  const int fh = feature_shape[1], fw = feature_shape[2];
  const int oh = output_shape[1], ow = output_shape[2];
  Require(fh <= oh && fw <= ow, ErrorKind::kConfig,
          "decoder feature spatial size " + ShapeToString(feature_shape) +
              " is larger than output " + ShapeToString(output_shape));
  Require(fh > 0 && fw > 0 && oh % fh == 0 && ow % fw == 0 && oh / fh == ow / fw,
          ErrorKind::kConfig,
          "decoder needs a uniform integer upscale from " +
              ShapeToString(feature_shape) + " to " + ShapeToString(output_shape));
  int ratio = oh / fh;
  int steps = 0;
  while (ratio > 1) {
    Require(ratio % 2 == 0, ErrorKind::kConfig,
            "decoder upscale factor must be a power of two");
    ratio /= 2;
    ++steps;
  }
  const int width = config.width;
  nn::Sequential net;
  net.Emplace<nn::Conv2d>(feature_shape[0], width, 3, 1, rng);
  net.Emplace<nn::GroupNorm>(NormGroups(width), width);
  net.Emplace<nn::ReLU>();
  for (int i = 0; i < steps; ++i) {
    net.Emplace<nn::Upsample>(2);
    net.Emplace<nn::Conv2d>(width, width, 3, 1, rng);
    net.Emplace<nn::GroupNorm>(NormGroups(width), width);
    net.Emplace<nn::ReLU>();
  }
  net.Emplace<nn::Conv2d>(width, output_shape[0], 3, 1, rng);
  if (config.sigmoid_output) net.Emplace<nn::Sigmoid>();
  return net;
}

}  // namespace mtsplit::model
