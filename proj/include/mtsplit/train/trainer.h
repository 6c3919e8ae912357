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

#ifndef MTSPLIT_TRAIN_TRAINER_H_
#define MTSPLIT_TRAIN_TRAINER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mtsplit/data/dataset.h"
#include "mtsplit/model/multitask.h"
#include "mtsplit/nn/optimizer.h"
#include "mtsplit/objectives/losses.h"
#include "mtsplit/objectives/similarity.h"
#include "mtsplit/privacy/accountant.h"

namespace mtsplit::train {

enum class RegimeKind { kInputObfuscationOnly, kTaskPrivacyOnly, kTwoPhase };

RegimeKind ParseRegimeKind(const std::string& name);
const char* RegimeKindName(RegimeKind kind);

struct TrainingRegime {
  RegimeKind kind = RegimeKind::kTaskPrivacyOnly;
  int phase1_epochs = 5;  // the only phase for single-phase regimes
  int phase2_epochs = 5;
  bool freeze_encoder_phase2 = true;
  std::uint64_t seed = 0;
};

struct TaskSpec {
  std::string task_id;
  model::TaskKind kind = model::TaskKind::kClassification;
  int num_outputs = 2;
  objectives::LossKind loss = objectives::LossKind::kCrossEntropy;
  bool is_private = false;
  std::vector<std::string> metrics;  // empty selects the kind's default
};

model::TaskHeadSpec HeadSpec(const TaskSpec& task);
std::vector<model::TaskHeadSpec> HeadSpecs(const std::vector<TaskSpec>& tasks);

// Unique ids, sensible outputs, and the private-task rule of the regime:
// exactly one private task for two-phase training, none otherwise.
void ValidateTasks(const std::vector<TaskSpec>& tasks, RegimeKind regime);

struct TrainerOptions {
  int batch_size = 32;
  nn::OptimizerConfig optimizer;
  objectives::LossWeights weights;
  objectives::SimilarityMeasure similarity;
  bool augment_flip = true;
  // Restore the epoch with the smallest mean training loss at the end of
  // each phase.
  bool select_best = true;
};

enum class TrainStatus { kCompleted, kBudgetExhausted };

const char* TrainStatusName(TrainStatus status);

struct EpochRecord {
  std::string phase;
  int epoch = 0;
  // Mean training loss per model task; NaN for tasks not trained this phase.
  std::vector<double> task_loss;
  double tp_loss = 0.0;  // mean task-privacy term, 0 when not computed
  double epsilon = 0.0;
  long dp_steps = 0;
};

struct TrainingResult {
  TrainStatus status = TrainStatus::kCompleted;
  std::vector<EpochRecord> history;
  std::optional<privacy::PrivacyLedger> ledger;
  std::vector<std::string> warnings;
};

// Number of optimizer steps per epoch for the given sizes.
long StepsPerEpoch(int dataset_size, int batch_size);

// dp with sample_rate set to batch_size / dataset_size.
privacy::DPConfig AccountingConfig(privacy::DPConfig dp, int dataset_size,
                                   int batch_size);

// Drives the training regimes over a MultiTaskModel whose branches follow
// the task list in order.
class Trainer {
 public:
  Trainer(model::MultiTaskModel& model, std::vector<TaskSpec> tasks,
          TrainerOptions options);

  const std::vector<TaskSpec>& tasks() const { return tasks_; }
  const TrainerOptions& options() const { return options_; }

  // Called after every epoch.
  void SetEpochCallback(std::function<void(const EpochRecord&)> callback) {
    on_epoch_ = std::move(callback);
  }

  // Encoder, metamorphs and heads of every task, producer side under DP.
  TrainingResult TrainInputObfuscation(const data::Dataset& data,
                                       const privacy::DPConfig& dp, int epochs,
                                       std::uint64_t seed);

  // Joint non-private training against the combined loss.
  TrainingResult TrainTaskPrivacy(const data::Dataset& data, int epochs,
                                  std::uint64_t seed);

  // Phase 1: encoder, metamorph and head of the private task under DP.
  // Phase 2: public metamorphs and heads (and the encoder when not frozen)
  // with the task-privacy term against the private task's features.
  TrainingResult TrainTwoPhase(const data::Dataset& data,
                               const TrainingRegime& regime,
                               const privacy::DPConfig& dp);

  // Dispatches on regime.kind. dp is required unless the regime is
  // task-privacy only.
  TrainingResult Run(const TrainingRegime& regime, const data::Dataset& data,
                     const privacy::DPConfig* dp);

  // Appends a branch and trains only it, with the task-privacy term against
  // every existing task's frozen features.
  TrainingResult AddTask(const TaskSpec& task, const data::Dataset& data,
                         int epochs, std::uint64_t seed);

 private:
  struct Plan {
    std::string phase;
    std::vector<std::size_t> trained;
    std::vector<std::size_t> frozen_features;
    bool train_encoder = false;
    double omega = 0.0;
    const privacy::DPConfig* dp = nullptr;
    int epochs = 0;
    std::uint64_t seed = 0;
  };

  struct BatchLoss {
    std::vector<double> task_loss;  // indexed like Plan::trained
    double tp = 0.0;
  };

  void CheckData(const data::Dataset& data) const;
  std::vector<nn::Parameter*> ProducerParameters(const Plan& plan);
  std::vector<nn::Parameter*> ConsumerParameters(const Plan& plan);
  double Weight(std::size_t task) const;
  BatchLoss ForwardBackward(const Plan& plan, const data::Dataset& batch);
  // Returns false when the privacy budget stopped the phase.
  bool RunPhase(const Plan& plan, const data::Dataset& data,
                TrainingResult& result);

  model::MultiTaskModel& model_;
  std::vector<TaskSpec> tasks_;
  TrainerOptions options_;
  std::function<void(const EpochRecord&)> on_epoch_;
};

}  // namespace mtsplit::train

#endif  // MTSPLIT_TRAIN_TRAINER_H_
