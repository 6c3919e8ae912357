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

#include "mtsplit/data/dataset.h"

#include <algorithm>
#include <numeric>

#include "mtsplit/error.h"

namespace mtsplit::data {
namespace {

template <typename T>
void FlipRows(T* data, int rows, int width) {
  for (int r = 0; r < rows; ++r) std::reverse(data + r * width, data + (r + 1) * width);
}

}  // namespace

std::size_t Dataset::TaskIndex(const std::string& task_id) const {
  for (std::size_t i = 0; i < task_ids.size(); ++i)
    if (task_ids[i] == task_id) return i;
  Fail(ErrorKind::kConfig, "dataset has no targets for task '" + task_id + "'");
}

Dataset Dataset::Subset(std::span<const int> rows) const {
  Dataset out;
  out.images = images.Gather(rows);
  out.task_ids = task_ids;
  for (const auto& t : targets) {
    objectives::TaskTarget s;
    if (!t.labels.values.empty()) s.labels = t.labels.Gather(rows);
    if (!t.values.empty()) s.values = t.values.Gather(rows);
    out.targets.push_back(std::move(s));
  }
  return out;
}

Dataset Dataset::Range(int begin, int end) const {
  Require(0 <= begin && begin <= end && end <= size(), ErrorKind::kConfig,
          "dataset range out of bounds");
  std::vector<int> rows(static_cast<std::size_t>(end - begin));
  std::iota(rows.begin(), rows.end(), begin);
  return Subset(rows);
}

std::vector<std::vector<int>> ShuffledBatches(int dataset_size, int batch_size,
                                              std::mt19937_64& rng) {
  Require(batch_size > 0, ErrorKind::kConfig, "batch_size must be positive");
  std::vector<int> order(static_cast<std::size_t>(dataset_size));
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with explicit draws keeps the order identical across
  // standard library implementations.
  for (int i = dataset_size - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < dataset_size; start += batch_size) {
    const int end = std::min(dataset_size, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

void FlipHorizontal(Dataset& batch, const std::vector<bool>& which) {
  const int n = batch.size();
  Require(static_cast<int>(which.size()) == n, ErrorKind::kConfig,
          "flip mask length does not match batch size");
  if (n == 0) return;
  const int w = batch.images.dim(3);
  const int image_rows = batch.images.dim(1) * batch.images.dim(2);
  for (int s = 0; s < n; ++s) {
    if (!which[s]) continue;
    FlipRows(batch.images.data() + s * batch.images.SampleSize(), image_rows, w);
    for (auto& t : batch.targets) {
      if (t.labels.shape.size() == 3) {
        FlipRows(t.labels.values.data() + s * t.labels.SampleSize(),
                 t.labels.shape[1], t.labels.shape[2]);
      }
      if (t.values.ndim() == 4) {
        FlipRows(t.values.data() + s * t.values.SampleSize(),
                 t.values.dim(1) * t.values.dim(2), t.values.dim(3));
      }
    }
  }
}

void RandomHorizontalFlip(Dataset& batch, std::mt19937_64& rng) {
  std::vector<bool> which(static_cast<std::size_t>(batch.size()));
  for (std::size_t i = 0; i < which.size(); ++i) which[i] = (rng() >> 63) != 0;
  FlipHorizontal(batch, which);
}

}  // namespace mtsplit::data
