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

#ifndef MTSPLIT_CLI_CHECKPOINT_H_
#define MTSPLIT_CLI_CHECKPOINT_H_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtsplit/model/multitask.h"
#include "mtsplit/tensor.h"

namespace mtsplit::cli {

// Archive layout, all integers little-endian:
//   "MMCK" | version u32 | meta_len u32 | meta (JSON text) | count u32 |
//   count x (name_len u16 | name | ndim u8 | ndim x u32 dims | f32 data) |
//   CRC32 of everything before it.
// Array names are "encoder/...", "metamorph/<task_id>/..." and
// "head/<task_id>/...", so every blob is keyed by component and task.
struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> arrays;

  // Throws kCorruption when absent.
  const Tensor& Array(const std::string& name) const;
};

std::vector<std::uint8_t> EncodeCheckpoint(const Checkpoint& checkpoint);
// Any structural or checksum problem is kCorruption.
Checkpoint DecodeCheckpoint(const std::vector<std::uint8_t>& bytes);

void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint ReadCheckpoint(const std::filesystem::path& path);

// Copies every model parameter into the archive.
void StoreParameters(model::MultiTaskModel& model, Checkpoint& checkpoint);
// Overwrites every model parameter; missing names or shape mismatches are
// kCorruption.
void LoadParameters(const Checkpoint& checkpoint, model::MultiTaskModel& model);

}  // namespace mtsplit::cli

#endif  // MTSPLIT_CLI_CHECKPOINT_H_
