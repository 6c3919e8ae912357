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

#ifndef MTSPLIT_MODEL_MULTITASK_H_
#define MTSPLIT_MODEL_MULTITASK_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mtsplit/model/backbone.h"
#include "mtsplit/model/decoder.h"
#include "mtsplit/model/metamorph.h"
#include "mtsplit/nn/module.h"

namespace mtsplit::model {

enum class TaskKind { kClassification, kSegmentation, kDenseRegression };

TaskKind ParseTaskKind(const std::string& name);
std::string TaskKindName(TaskKind kind);

struct TaskHeadSpec {
  std::string task_id;
  TaskKind kind = TaskKind::kClassification;
  int num_outputs = 2;  // classes, or output channels for regression
};

struct ArchitectureConfig {
  BackboneSpec backbone = DefaultBackboneSpec();
  MetamorphConfig metamorph;
  int dense_head_width = 16;
};

// Consumer-side network for one task: the backbone blocks after the split
// followed by a task-kind specific output stage. Classification heads emit
// (N, classes) scores; dense heads emit (N, outputs, H, W) at input size.
nn::Sequential BuildTaskHead(const ArchitectureConfig& arch,
                             const TaskHeadSpec& task, std::mt19937_64& rng);

// Deterministic per-task generator derived from the model seed.
std::mt19937_64 TaskRng(std::uint64_t seed, std::size_t task_index);

struct TaskBranch {
  TaskHeadSpec spec;
  Metamorph metamorph;
  nn::Sequential head;
};

// Shared producer encoder plus one (metamorph, head) branch per task.
// Copying deep-copies every module.
class MultiTaskModel {
 public:
  MultiTaskModel(ArchitectureConfig arch, const std::vector<TaskHeadSpec>& tasks,
                 std::uint64_t seed);

  // Appends a freshly initialised branch. Returns its index.
  std::size_t AddTask(const TaskHeadSpec& task);

  const ArchitectureConfig& architecture() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  const Shape& input_shape() const { return arch_.backbone.input_shape; }
  const Shape& feature_shape() const { return feature_shape_; }

  nn::Sequential& encoder() { return encoder_; }
  std::size_t num_tasks() const { return branches_.size(); }
  TaskBranch& branch(std::size_t i) { return branches_.at(i); }
  const TaskBranch& branch(std::size_t i) const { return branches_.at(i); }
  // Throws kConfig for unknown ids.
  std::size_t IndexOf(const std::string& task_id) const;

  std::vector<nn::Parameter*> EncoderParameters();
  std::vector<nn::Parameter*> MetamorphParameters(std::size_t task);
  std::vector<nn::Parameter*> HeadParameters(std::size_t task);
  // Everything, named "encoder/...", "metamorph/<task>/...", "head/<task>/...".
  std::vector<nn::Parameter*> AllParameters();

  // Forward helpers; each call overwrites the modules' backward caches.
  Tensor Encode(const Tensor& images) { return encoder_.Forward(images); }
  Tensor Transform(std::size_t task, const Tensor& encoded) {
    return branches_.at(task).metamorph.Forward(encoded);
  }
  // head_task's head applied to module_task's metamorph output.
  Tensor Predict(std::size_t module_task, std::size_t head_task, const Tensor& images);

 private:
  ArchitectureConfig arch_;
  std::uint64_t seed_;
  nn::Sequential encoder_;
  Shape feature_shape_;
  std::vector<TaskBranch> branches_;
};

}  // namespace mtsplit::model

#endif  // MTSPLIT_MODEL_MULTITASK_H_
