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

#include "mtsplit/model/multitask.h"

#include "mtsplit/error.h"
#include "mtsplit/nn/layers.h"

namespace mtsplit::model {

TaskKind ParseTaskKind(const std::string& name) {
  if (name == "classification") return TaskKind::kClassification;
  if (name == "segmentation") return TaskKind::kSegmentation;
  if (name == "dense_regression" || name == "dense-regression" || name == "depth") {
    return TaskKind::kDenseRegression;
  }
  Fail(ErrorKind::kConfig, "unknown task kind '" + name +
                               "' (expected classification, segmentation or "
                               "dense_regression)");
}

std::string TaskKindName(TaskKind kind) {
  switch (kind) {
    case TaskKind::kClassification: return "classification";
    case TaskKind::kSegmentation: return "segmentation";
    case TaskKind::kDenseRegression: return "dense_regression";
  }
  return "unknown";
}

nn::Sequential BuildTaskHead(const ArchitectureConfig& arch,
                             const TaskHeadSpec& task, std::mt19937_64& rng) {
  const BackboneSpec& spec = arch.backbone;
  ValidateBackboneSpec(spec);
  Require(task.num_outputs > 0, ErrorKind::kConfig,
          "task '" + task.task_id + "' needs num_outputs > 0");
  nn::Sequential head;
  Shape shape = ShapeAfterBlocks(spec, spec.split_index);
  for (std::size_t i = static_cast<std::size_t>(spec.split_index); i < spec.blocks.size(); ++i) {
    head.Add(std::make_unique<nn::Sequential>(MakeBlock(spec.blocks[i], shape[0], rng)));
    shape = head.layer(head.size() - 1).OutputShape(shape);
  }
  if (task.kind == TaskKind::kClassification) {
    head.Emplace<nn::GlobalAvgPool>();
    head.Emplace<nn::Linear>(shape[0], task.num_outputs, rng);
    return head;
  }
  DecoderConfig dc;
  dc.width = arch.dense_head_width;
  dc.sigmoid_output = false;
  nn::Sequential up = BuildDecoder(
      shape, {task.num_outputs, spec.input_shape[1], spec.input_shape[2]}, dc, rng);
  head.Add(std::make_unique<nn::Sequential>(std::move(up)));
  return head;
}

std::mt19937_64 TaskRng(std::uint64_t seed, std::size_t task_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(task_index + 1), 0x6d74u};
  return std::mt19937_64(seq);
}

MultiTaskModel::MultiTaskModel(ArchitectureConfig arch,
                               const std::vector<TaskHeadSpec>& tasks,
                               std::uint64_t seed)
    : arch_(std::move(arch)), seed_(seed) {
  std::mt19937_64 rng(seed);
  SplitBackbone split = BuildSplitBackbone(arch_.backbone, rng);
  encoder_ = std::move(split.producer);
  feature_shape_ = split.feature_shape;
  ValidateMetamorphConfig(arch_.metamorph, feature_shape_[0]);
  for (const TaskHeadSpec& t : tasks) AddTask(t);
}

std::size_t MultiTaskModel::AddTask(const TaskHeadSpec& task) {
  Require(!task.task_id.empty(), ErrorKind::kConfig, "task_id must be non-empty");
  for (const TaskBranch& b : branches_) {
    Require(b.spec.task_id != task.task_id, ErrorKind::kConfig,
            "duplicate task_id '" + task.task_id + "'");
  }
  std::mt19937_64 rng = TaskRng(seed_, branches_.size());
  Metamorph metamorph(arch_.metamorph, feature_shape_[0], rng);
  nn::Sequential head = BuildTaskHead(arch_, task, rng);
  branches_.push_back(TaskBranch{task, std::move(metamorph), std::move(head)});
  return branches_.size() - 1;
}

std::size_t MultiTaskModel::IndexOf(const std::string& task_id) const {
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    if (branches_[i].spec.task_id == task_id) return i;
  }
  Fail(ErrorKind::kConfig, "unknown task_id '" + task_id + "'");
}

std::vector<nn::Parameter*> MultiTaskModel::EncoderParameters() {
  return encoder_.Parameters("encoder/");
}

std::vector<nn::Parameter*> MultiTaskModel::MetamorphParameters(std::size_t task) {
  TaskBranch& b = branches_.at(task);
  return b.metamorph.Parameters("metamorph/" + b.spec.task_id + "/");
}

std::vector<nn::Parameter*> MultiTaskModel::HeadParameters(std::size_t task) {
  TaskBranch& b = branches_.at(task);
  return b.head.Parameters("head/" + b.spec.task_id + "/");
}

std::vector<nn::Parameter*> MultiTaskModel::AllParameters() {
  std::vector<nn::Parameter*> out = EncoderParameters();
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    auto m = MetamorphParameters(i);
    out.insert(out.end(), m.begin(), m.end());
  }
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    auto h = HeadParameters(i);
    out.insert(out.end(), h.begin(), h.end());
  }
  return out;
}

Tensor MultiTaskModel::Predict(std::size_t module_task, std::size_t head_task,
                               const Tensor& images) {
  Tensor z = Encode(images);
  Tensor f = Transform(module_task, z);
  return branches_.at(head_task).head.Forward(f);
}

}  // namespace mtsplit::model
