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

#ifndef MTSPLIT_CLI_CONFIG_H_
#define MTSPLIT_CLI_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtsplit/attacks/evaluation.h"
#include "mtsplit/data/image_io.h"
#include "mtsplit/data/synthetic.h"
#include "mtsplit/model/multitask.h"
#include "mtsplit/objectives/similarity.h"
#include "mtsplit/privacy/dp.h"
#include "mtsplit/train/trainer.h"

namespace mtsplit::cli {

enum class DatasetKind { kSyntheticClassification, kSyntheticDense, kImageFolder };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::kSyntheticClassification;
  // Synthetic scenes; height and width also size image-folder inputs.
  data::SyntheticSceneConfig scene;
  int test_samples = 400;  // synthetic held-out split, generated from seed + 1
  std::string folder;
  std::string labels_csv;
  std::string test_folder;  // empty evaluates on the training folder
  std::string test_labels_csv;
  data::ImageFolderConfig image;
};

// Privacy fields carry no defaults: C and delta are required, plus sigma,
// epsilon or both. Sigma alone means an unbounded ledger; epsilon alone
// calibrates sigma for the planned DP steps.
struct DpBlock {
  double clip_threshold = 0.0;
  std::optional<double> noise_multiplier;
  std::optional<double> target_epsilon;
  double target_delta = 0.0;
};

struct TrainingBlock {
  int batch_size = 32;
  nn::OptimizerConfig optimizer;
  bool augment_flip = true;
  bool select_best = true;
  objectives::SimilarityMeasure similarity;
};

struct AttackBlock {
  attacks::AttackConfig attack;
  int train_samples = 500;
  int test_samples = 100;
};

struct RuntimeBlock {
  std::string listen = "127.0.0.1:7070";
  std::string connect = "127.0.0.1:7070";
  std::string key;
  std::uint64_t session_id = 1;
  std::string task_id;  // empty selects the first task
  std::string wire_dtype = "f32";
  double timeout_seconds = 30.0;
  long max_batches = -1;
  int epochs = 1;
  std::string dump;  // raw frame capture file
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  std::vector<model::BlockDescriptor> blocks = model::DefaultBackboneSpec().blocks;
  int split_index = model::DefaultBackboneSpec().split_index;
  int dense_head_width = 16;
  std::vector<train::TaskSpec> tasks;
  model::MetamorphConfig metamorph;
  std::optional<DpBlock> dp;
  objectives::LossWeights weights;
  train::TrainingRegime regime;
  TrainingBlock training;
  AttackBlock attack;
  RuntimeBlock runtime;
  std::string output_dir = "mtsplit-run";
};

// Errors are kConfig and name the offending field path, e.g.
// "tasks[1].kind: unknown task kind 'x'" or "unknown field 'dp.sigma'".
ExperimentConfig ParseConfig(const nlohmann::json& document);
nlohmann::json ConfigToJson(const ExperimentConfig& config);

// "a.b.c=value"; numeric segments index arrays. The value is parsed as JSON
// when it is valid JSON and taken as a string otherwise.
void ApplyOverride(nlohmann::json& document, const std::string& assignment);

nlohmann::json ReadJsonFile(const std::filesystem::path& path);
ExperimentConfig LoadConfig(const std::filesystem::path& path,
                            const std::vector<std::string>& overrides = {});

model::ArchitectureConfig Architecture(const ExperimentConfig& config);
train::TrainerOptions TrainerOptionsFor(const ExperimentConfig& config);

// DP steps the regime will take on a dataset of the given size.
long PlannedDpSteps(const ExperimentConfig& config, int dataset_size);
// Concrete DP parameters; calibrates sigma when only epsilon is given.
privacy::DPConfig ResolveDp(const ExperimentConfig& config, int dataset_size);

struct DataSplits {
  data::Dataset train;
  data::Dataset test;
};

DataSplits LoadData(const ExperimentConfig& config);

}  // namespace mtsplit::cli

#endif  // MTSPLIT_CLI_CONFIG_H_
