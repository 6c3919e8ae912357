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

#ifndef MTSPLIT_DATA_IMAGE_IO_H_
#define MTSPLIT_DATA_IMAGE_IO_H_

#include <array>
#include <filesystem>
#include <span>

#include "mtsplit/data/dataset.h"
#include "mtsplit/tensor.h"

namespace mtsplit::data {

// Reads a PNG or binary/ASCII PPM (P6/P3) as a (3, H, W) tensor in [0, 1].
// Grey images are replicated across channels; alpha is dropped.
Tensor ReadImage(const std::filesystem::path& path);

// Writes a (3, H, W) or (1, H, W) tensor, clamped to [0, 1], as 8-bit PNG.
void WritePng(const std::filesystem::path& path, const Tensor& image);

// Bilinear resize of a (C, H, W) tensor.
Tensor Resize(const Tensor& image, int height, int width);

// Tiles (3, H, W) images row-major into a grid with a one pixel gutter.
Tensor ImageGrid(std::span<const Tensor> images, int columns);

struct ImageFolderConfig {
  int height = 32;
  int width = 32;
  std::array<double, 3> mean = {0.485, 0.456, 0.406};
  std::array<double, 3> stddev = {0.229, 0.224, 0.225};
};

// Loads images listed in a CSV with header "filename,<task>,<task>,...".
// Rows are ordered by filename; every label is an integer class id.
Dataset LoadImageFolder(const std::filesystem::path& folder,
                        const std::filesystem::path& label_csv,
                        const ImageFolderConfig& config);

}  // namespace mtsplit::data

#endif  // MTSPLIT_DATA_IMAGE_IO_H_
