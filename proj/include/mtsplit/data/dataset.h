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

#ifndef MTSPLIT_DATA_DATASET_H_
#define MTSPLIT_DATA_DATASET_H_

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mtsplit/objectives/losses.h"
#include "mtsplit/tensor.h"

namespace mtsplit::data {

// Images (N, 3, H, W) with one target per task. Class and segmentation
// targets use TaskTarget::labels; depth-like targets use TaskTarget::values.
struct Dataset {
  Tensor images;
  std::vector<std::string> task_ids;
  std::vector<objectives::TaskTarget> targets;

  int size() const { return images.empty() ? 0 : images.dim(0); }
  // Throws kConfig for unknown ids.
  std::size_t TaskIndex(const std::string& task_id) const;
  const objectives::TaskTarget& Target(const std::string& task_id) const {
    return targets[TaskIndex(task_id)];
  }
  Dataset Subset(std::span<const int> rows) const;
  // Rows [begin, end).
  Dataset Range(int begin, int end) const;
};

// Per-epoch batch order: a seeded permutation cut into consecutive batches.
// The final short batch is kept.
std::vector<std::vector<int>> ShuffledBatches(int dataset_size, int batch_size,
                                              std::mt19937_64& rng);

// Mirrors the selected samples left-right, together with their dense targets.
void FlipHorizontal(Dataset& batch, const std::vector<bool>& which);

// Flips each sample with probability one half.
void RandomHorizontalFlip(Dataset& batch, std::mt19937_64& rng);

}  // namespace mtsplit::data

#endif  // MTSPLIT_DATA_DATASET_H_
