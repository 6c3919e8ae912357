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

#include "mtsplit/train/trainer.h"

#include <cmath>
#include <limits>
#include <set>

#include "mtsplit/error.h"
#include "mtsplit/privacy/dp.h"

namespace mtsplit::train {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void Append(std::vector<nn::Parameter*>& out, std::vector<nn::Parameter*> more) {
  out.insert(out.end(), more.begin(), more.end());
}

}  // namespace

RegimeKind ParseRegimeKind(const std::string& name) {
  if (name == "input_obfuscation_only") return RegimeKind::kInputObfuscationOnly;
  if (name == "task_privacy_only") return RegimeKind::kTaskPrivacyOnly;
  if (name == "two_phase") return RegimeKind::kTwoPhase;
  Fail(ErrorKind::kConfig, "unknown regime '" + name +
                               "' (expected input_obfuscation_only, "
                               "task_privacy_only or two_phase)");
}

const char* RegimeKindName(RegimeKind kind) {
  switch (kind) {
    case RegimeKind::kInputObfuscationOnly: return "input_obfuscation_only";
    case RegimeKind::kTaskPrivacyOnly: return "task_privacy_only";
    case RegimeKind::kTwoPhase: return "two_phase";
  }
  return "?";
}

const char* TrainStatusName(TrainStatus status) {
  return status == TrainStatus::kCompleted ? "completed" : "budget_exhausted";
}

model::TaskHeadSpec HeadSpec(const TaskSpec& task) {
  return {task.task_id, task.kind, task.num_outputs};
}

std::vector<model::TaskHeadSpec> HeadSpecs(const std::vector<TaskSpec>& tasks) {
  std::vector<model::TaskHeadSpec> out;
  for (const auto& t : tasks) out.push_back(HeadSpec(t));
  return out;
}

void ValidateTasks(const std::vector<TaskSpec>& tasks, RegimeKind regime) {
  Require(!tasks.empty(), ErrorKind::kConfig, "tasks: at least one task is required");
  std::set<std::string> ids;
  int private_count = 0;
  for (const auto& t : tasks) {
    Require(!t.task_id.empty(), ErrorKind::kConfig, "tasks: empty task_id");
    Require(ids.insert(t.task_id).second, ErrorKind::kConfig,
            "tasks: duplicate task_id '" + t.task_id + "'");
    Require(t.num_outputs >= 1, ErrorKind::kConfig,
            "tasks." + t.task_id + ".num_outputs must be >= 1");
    const bool classy = t.kind != model::TaskKind::kDenseRegression;
    Require(classy == (t.loss == objectives::LossKind::kCrossEntropy),
            ErrorKind::kConfig,
            "tasks." + t.task_id + ".loss '" + objectives::LossKindName(t.loss) +
                "' does not fit task kind " + model::TaskKindName(t.kind));
    private_count += t.is_private;
  }
  if (regime == RegimeKind::kTwoPhase) {
    Require(private_count == 1, ErrorKind::kConfig,
            "two_phase training needs exactly one task with is_private = true, found " +
                std::to_string(private_count));
  } else {
    Require(private_count == 0, ErrorKind::kConfig,
            std::string("is_private is only meaningful for two_phase training (regime ") +
                RegimeKindName(regime) + ")");
  }
}

long StepsPerEpoch(int dataset_size, int batch_size) {
  return (dataset_size + batch_size - 1) / batch_size;
}

privacy::DPConfig AccountingConfig(privacy::DPConfig dp, int dataset_size,
                                   int batch_size) {
  Require(dataset_size > 0 && batch_size > 0, ErrorKind::kConfig,
          "accounting needs a non-empty dataset and a positive batch size");
  dp.sample_rate = std::min(1.0, static_cast<double>(batch_size) / dataset_size);
  return dp;
}

Trainer::Trainer(model::MultiTaskModel& model, std::vector<TaskSpec> tasks,
                 TrainerOptions options)
    : model_(model), tasks_(std::move(tasks)), options_(std::move(options)) {
  Require(tasks_.size() == model_.num_tasks(), ErrorKind::kConfig,
          "task list does not match the model's branches");
  for (std::size_t i = 0; i < tasks_.size(); ++i)
    Require(tasks_[i].task_id == model_.branch(i).spec.task_id, ErrorKind::kConfig,
            "task '" + tasks_[i].task_id + "' is not model branch " + std::to_string(i));
  Require(options_.batch_size > 0, ErrorKind::kConfig, "batch_size must be positive");
  objectives::ValidateLossWeights(options_.weights, options_.weights.per_task.empty()
                                                        ? tasks_.size()
                                                        : options_.weights.per_task.size());
  objectives::ValidateSimilarityMeasure(options_.similarity);
}

double Trainer::Weight(std::size_t task) const {
  const auto& w = options_.weights.per_task;
  return task < w.size() ? w[task] : 1.0;
}

void Trainer::CheckData(const data::Dataset& data) const {
  Shape expect = model_.input_shape();
  expect.insert(expect.begin(), data.size());
  Require(data.images.shape() == expect, ErrorKind::kConfig,
          "dataset images " + ShapeToString(data.images.shape()) +
              " do not match the model input " + ShapeToString(expect));
}

std::vector<nn::Parameter*> Trainer::ProducerParameters(const Plan& plan) {
  std::vector<nn::Parameter*> out;
  if (plan.train_encoder) Append(out, model_.EncoderParameters());
  for (std::size_t t : plan.trained) Append(out, model_.MetamorphParameters(t));
  return out;
}

std::vector<nn::Parameter*> Trainer::ConsumerParameters(const Plan& plan) {
  std::vector<nn::Parameter*> out;
  for (std::size_t t : plan.trained) Append(out, model_.HeadParameters(t));
  return out;
}

Trainer::BatchLoss Trainer::ForwardBackward(const Plan& plan,
                                            const data::Dataset& batch) {
  BatchLoss loss;
  const Tensor z = model_.Encode(batch.images);
  std::vector<Tensor> features;
  std::vector<Tensor> feature_grads;
  for (std::size_t i = 0; i < plan.trained.size(); ++i) {
    const std::size_t t = plan.trained[i];
    features.push_back(model_.Transform(t, z));
    auto& head = model_.branch(t).head;
    const Tensor out = head.Forward(features.back());
    Tensor grad;
    loss.task_loss.push_back(objectives::TaskLoss(
        tasks_[t].loss, out, batch.Target(tasks_[t].task_id), &grad));
    grad *= static_cast<float>(Weight(t));
    feature_grads.push_back(head.Backward(grad));
  }
  if (plan.omega > 0 && plan.trained.size() + plan.frozen_features.size() >= 2) {
    for (std::size_t t : plan.frozen_features) features.push_back(model_.Transform(t, z));
    std::vector<Tensor> tp_grads;
    loss.tp = objectives::TaskPrivacyLoss(features, options_.similarity, &tp_grads);
    for (std::size_t i = 0; i < plan.trained.size(); ++i) {
      tp_grads[i] *= static_cast<float>(plan.omega);
      feature_grads[i] += tp_grads[i];
    }
  }
  Tensor grad_z;
  for (std::size_t i = 0; i < plan.trained.size(); ++i) {
    Tensor g = model_.branch(plan.trained[i]).metamorph.Backward(feature_grads[i]);
    if (i == 0)
      grad_z = std::move(g);
    else
      grad_z += g;
  }
  if (plan.train_encoder) model_.encoder().Backward(grad_z);
  return loss;
}

bool Trainer::RunPhase(const Plan& plan, const data::Dataset& data,
                       TrainingResult& result) {
  if (plan.epochs <= 0 || plan.trained.empty()) return true;
  for (std::size_t t : plan.trained) data.TaskIndex(tasks_[t].task_id);
  const auto producer = ProducerParameters(plan);
  const auto consumer = ConsumerParameters(plan);
  std::vector<nn::Parameter*> all = producer;
  Append(all, consumer);
  nn::Optimizer optimizer(all, options_.optimizer);

  std::mt19937_64 rng(plan.seed);
  std::optional<privacy::NoiseSource> noise;
  privacy::DPConfig dp;
  if (plan.dp) {
    dp = AccountingConfig(*plan.dp, data.size(), options_.batch_size);
    privacy::ValidateDPConfig(dp);
    noise.emplace(plan.seed ^ 0x9e3779b97f4a7c15ULL);
    if (!result.ledger) result.ledger.emplace(dp);
  }

  double best = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_values;
  bool budget_ok = true;
  for (int epoch = 0; epoch < plan.epochs && budget_ok; ++epoch) {
    optimizer.SetEpoch(epoch);
    std::vector<double> loss_sum(plan.trained.size(), 0.0);
    double tp_sum = 0.0;
    long samples = 0;
    for (const auto& rows : data::ShuffledBatches(data.size(), options_.batch_size, rng)) {
      data::Dataset batch = data.Subset(rows);
      if (options_.augment_flip) data::RandomHorizontalFlip(batch, rng);
      const int n = batch.size();
      if (!plan.dp) {
        for (auto* p : all) p->grad.Fill(0.0f);
        const BatchLoss l = ForwardBackward(plan, batch);
        for (std::size_t i = 0; i < l.task_loss.size(); ++i) loss_sum[i] += l.task_loss[i] * n;
        tp_sum += l.tp * n;
      } else {
        privacy::PrivacyLedger next = *result.ledger;
        next.Step(dp.noise_multiplier, dp.sample_rate);
        if (next.Exhausted()) {
          budget_ok = false;
          break;
        }
        privacy::GradientSet per_sample;
        std::vector<float> consumer_sum(nn::TotalSize(consumer), 0.0f);
        for (int s = 0; s < n; ++s) {
          for (auto* p : all) p->grad.Fill(0.0f);
          const int row[] = {s};
          const BatchLoss l = ForwardBackward(plan, batch.Subset(row));
          for (std::size_t i = 0; i < l.task_loss.size(); ++i) loss_sum[i] += l.task_loss[i];
          tp_sum += l.tp;
          per_sample.push_back(nn::FlattenGrads(producer));
          const auto c = nn::FlattenGrads(consumer);
          for (std::size_t i = 0; i < c.size(); ++i) consumer_sum[i] += c[i];
        }
        const auto clipped = privacy::ClipPerSample(per_sample, dp.clip_threshold);
        nn::AssignGrads(producer, privacy::NoisyAggregate(clipped, dp.noise_multiplier,
                                                          dp.clip_threshold, *noise));
        for (float& v : consumer_sum) v /= static_cast<float>(n);
        nn::AssignGrads(consumer, consumer_sum);
        *result.ledger = std::move(next);
      }
      samples += n;
      optimizer.Step();
    }
    if (samples == 0) break;

    EpochRecord record;
    record.phase = plan.phase;
    record.epoch = epoch;
    record.task_loss.assign(model_.num_tasks(), kNaN);
    double mean = 0.0;
    for (std::size_t i = 0; i < plan.trained.size(); ++i) {
      const double v = loss_sum[i] / static_cast<double>(samples);
      Require(std::isfinite(v), ErrorKind::kNumeric,
              "non-finite training loss for task '" + tasks_[plan.trained[i]].task_id +
                  "' in " + plan.phase + " epoch " + std::to_string(epoch));
      record.task_loss[plan.trained[i]] = v;
      mean += v / static_cast<double>(plan.trained.size());
    }
    record.tp_loss = tp_sum / static_cast<double>(samples);
    if (result.ledger) {
      record.epsilon = result.ledger->Epsilon();
      record.dp_steps = result.ledger->steps();
    }
    result.history.push_back(record);
    if (on_epoch_) on_epoch_(record);
    if (options_.select_best && mean < best) {
      best = mean;
      best_values = nn::SnapshotValues(all);
    }
  }
  if (options_.select_best && !best_values.empty()) nn::RestoreValues(all, best_values);
  if (!budget_ok) result.status = TrainStatus::kBudgetExhausted;
  return budget_ok;
}

TrainingResult Trainer::TrainInputObfuscation(const data::Dataset& data,
                                              const privacy::DPConfig& dp,
                                              int epochs, std::uint64_t seed) {
  CheckData(data);
  Plan plan;
  plan.phase = "input_obfuscation";
  for (std::size_t t = 0; t < tasks_.size(); ++t) plan.trained.push_back(t);
  plan.train_encoder = true;
  plan.dp = &dp;
  plan.epochs = epochs;
  plan.seed = seed;
  TrainingResult result;
  result.ledger.emplace(AccountingConfig(dp, std::max(1, data.size()), options_.batch_size));
  RunPhase(plan, data, result);
  return result;
}

TrainingResult Trainer::TrainTaskPrivacy(const data::Dataset& data, int epochs,
                                         std::uint64_t seed) {
  CheckData(data);
  Plan plan;
  plan.phase = "task_privacy";
  for (std::size_t t = 0; t < tasks_.size(); ++t) plan.trained.push_back(t);
  plan.train_encoder = true;
  plan.omega = options_.weights.omega;
  plan.epochs = epochs;
  plan.seed = seed;
  TrainingResult result;
  if (tasks_.size() < 2 && plan.omega > 0)
    result.warnings.push_back("single task with omega > 0: the task-privacy term is 0");
  RunPhase(plan, data, result);
  return result;
}

TrainingResult Trainer::TrainTwoPhase(const data::Dataset& data,
                                      const TrainingRegime& regime,
                                      const privacy::DPConfig& dp) {
  ValidateTasks(tasks_, RegimeKind::kTwoPhase);
  CheckData(data);
  std::size_t private_task = 0;
  for (std::size_t t = 0; t < tasks_.size(); ++t)
    if (tasks_[t].is_private) private_task = t;

  TrainingResult result;
  result.ledger.emplace(AccountingConfig(dp, std::max(1, data.size()), options_.batch_size));
  Plan phase1;
  phase1.phase = "phase1";
  phase1.trained = {private_task};
  phase1.train_encoder = true;
  phase1.dp = &dp;
  phase1.epochs = regime.phase1_epochs;
  phase1.seed = regime.seed;
  if (!RunPhase(phase1, data, result)) return result;

  Plan phase2;
  phase2.phase = "phase2";
  for (std::size_t t = 0; t < tasks_.size(); ++t)
    if (t != private_task) phase2.trained.push_back(t);
  phase2.frozen_features = {private_task};
  phase2.train_encoder = !regime.freeze_encoder_phase2;
  phase2.omega = options_.weights.omega;
  phase2.epochs = regime.phase2_epochs;
  phase2.seed = regime.seed + 1;
  if (phase2.train_encoder && phase2.epochs > 0)
    result.warnings.push_back(
        "encoder updated without noise in phase 2; the privacy ledger covers phase 1 only");
  RunPhase(phase2, data, result);
  return result;
}

TrainingResult Trainer::Run(const TrainingRegime& regime, const data::Dataset& data,
                            const privacy::DPConfig* dp) {
  ValidateTasks(tasks_, regime.kind);
  switch (regime.kind) {
    case RegimeKind::kInputObfuscationOnly:
      Require(dp != nullptr, ErrorKind::kConfig, "input obfuscation requires a dp block");
      return TrainInputObfuscation(data, *dp, regime.phase1_epochs, regime.seed);
    case RegimeKind::kTaskPrivacyOnly:
      return TrainTaskPrivacy(data, regime.phase1_epochs, regime.seed);
    case RegimeKind::kTwoPhase:
      Require(dp != nullptr, ErrorKind::kConfig, "two_phase training requires a dp block");
      return TrainTwoPhase(data, regime, *dp);
  }
  return {};
}

TrainingResult Trainer::AddTask(const TaskSpec& task, const data::Dataset& data,
                                int epochs, std::uint64_t seed) {
  std::vector<TaskSpec> extended = tasks_;
  extended.push_back(task);
  for (auto& t : extended) t.is_private = false;
  ValidateTasks(extended, RegimeKind::kTaskPrivacyOnly);
  CheckData(data);
  data.TaskIndex(task.task_id);

  const std::size_t index = model_.AddTask(HeadSpec(task));
  tasks_.push_back(task);
  Plan plan;
  plan.phase = "add_task";
  plan.trained = {index};
  for (std::size_t t = 0; t < index; ++t) plan.frozen_features.push_back(t);
  plan.omega = options_.weights.omega;
  plan.epochs = epochs;
  plan.seed = seed;
  TrainingResult result;
  RunPhase(plan, data, result);
  return result;
}

}  // namespace mtsplit::train
