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

#ifndef MTSPLIT_ATTACKS_EVALUATION_H_
#define MTSPLIT_ATTACKS_EVALUATION_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mtsplit/data/dataset.h"
#include "mtsplit/model/decoder.h"
#include "mtsplit/model/multitask.h"
#include "mtsplit/train/trainer.h"

namespace mtsplit::attacks {

// Metric reported for a task: its first selector, or accuracy / miou /
// abs_err by task kind.
std::string PrimaryMetric(const train::TaskSpec& task);

// Known selectors: accuracy, miou, pixel_accuracy, abs_err, rel_err,
// normal_mean, normal_median, normal_11_25, normal_22_5, normal_30.
double ComputeMetric(const std::string& metric, const train::TaskSpec& task,
                     const Tensor& prediction, const objectives::TaskTarget& target);

// Runs head_task's head on module_task's metamorph output over the data.
Tensor PredictAll(model::MultiTaskModel& model, std::size_t module_task,
                  std::size_t head_task, const Tensor& images, int batch_size = 64);

// Matched inference metric of one task.
double EvaluateTask(model::MultiTaskModel& model, const std::vector<train::TaskSpec>& tasks,
                    std::size_t task, const data::Dataset& data);

struct InterchangeReport {
  std::vector<std::string> task_ids;
  std::vector<std::string> metrics;  // per classifier (column) task
  // values[module][classifier]
  std::vector<std::vector<double>> values;
};

InterchangeReport EvaluateInterchange(model::MultiTaskModel& model,
                                      const std::vector<train::TaskSpec>& tasks,
                                      const data::Dataset& data);

// "cell module=<id> classifier=<id> metric=<name> value=<v>" lines followed by
// a rendered table with modules as rows and classifiers as columns.
std::string RenderInterchange(const InterchangeReport& report);

enum class EncoderPrivacy { kPrivate, kNonPrivate };

const char* EncoderPrivacyName(EncoderPrivacy p);

struct AttackConfig {
  int epochs = 20;
  double learning_rate = 1e-3;
  int batch_size = 32;
  model::DecoderConfig decoder;
  std::uint64_t seed = 0;
};

struct ReconstructionReport {
  int attack_epochs = 0;
  EncoderPrivacy encoder_privacy = EncoderPrivacy::kNonPrivate;
  std::vector<double> scores;  // SSIM per held-out image
  double mean_score = 0.0;
  std::vector<double> train_loss;  // per attack epoch
};

using FeatureFn = std::function<Tensor(const Tensor& images)>;

// Trains a decoder on (features(x), x) pairs from attack_train with an
// L1 + (1 - SSIM) objective and scores reconstructions of attack_test.
// Images must lie in [0, 1]. When reconstructions is given it receives the
// decoded attack_test images.
ReconstructionReport ReconstructionAttack(const FeatureFn& features,
                                          const Tensor& attack_train,
                                          const Tensor& attack_test,
                                          const AttackConfig& config,
                                          EncoderPrivacy privacy,
                                          Tensor* reconstructions = nullptr);

std::string RenderReconstruction(const ReconstructionReport& report);

// Features g_task(E(x)) for every task, flattened per sample: one CSV row
// "sample_id,task_id,v0,v1,..." per (sample, task), after a header row.
void ExportEmbeddings(model::MultiTaskModel& model, const Tensor& images,
                      const std::filesystem::path& path);

// Mean over samples and ordered task pairs of the cosine similarity between
// one sample's flattened features for two different tasks.
double MeanCrossTaskCosine(model::MultiTaskModel& model, const Tensor& images);

}  // namespace mtsplit::attacks

#endif  // MTSPLIT_ATTACKS_EVALUATION_H_
