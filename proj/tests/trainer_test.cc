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

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "mtsplit/data/synthetic.h"
#include "mtsplit/error.h"
#include "mtsplit/nn/module.h"
#include "mtsplit/objectives/similarity.h"
#include "mtsplit/train/trainer.h"

namespace mtsplit::train {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

data::Dataset Pair(int n, std::uint64_t seed = 1) {
  data::SyntheticSceneConfig c;
  c.num_samples = n;
  c.seed = seed;
  return data::GenerateClassificationPair(c);
}

std::vector<TaskSpec> TwoTasks(bool first_private = false) {
  TaskSpec shape{"shape", model::TaskKind::kClassification, 2,
                 objectives::LossKind::kCrossEntropy, first_private, {}};
  TaskSpec color{"color", model::TaskKind::kClassification, 2,
                 objectives::LossKind::kCrossEntropy, false, {}};
  return {shape, color};
}

model::MultiTaskModel MakeModel(const std::vector<TaskSpec>& tasks, std::uint64_t seed = 3) {
  return model::MultiTaskModel(model::ArchitectureConfig{}, HeadSpecs(tasks), seed);
}

TrainerOptions Options(double omega = 0.0) {
  TrainerOptions o;
  o.batch_size = 8;
  o.optimizer.learning_rate = 1e-3;
  o.weights.omega = omega;
  return o;
}

double MaxRelativeDiff(model::MultiTaskModel& a, model::MultiTaskModel& b) {
  auto pa = a.AllParameters(), pb = b.AllParameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pa[i]->value.size(); ++j) {
      const double x = pa[i]->value[j], y = pb[i]->value[j];
      worst = std::max(worst, std::abs(x - y) / std::max(1.0, std::abs(y)));
    }
  return worst;
}

TEST(TrainerTest, DegenerateDpMatchesPlainTraining) {
  const data::Dataset d = Pair(24);
  auto tasks = TwoTasks();
  tasks.resize(1);
  model::MultiTaskModel private_model = MakeModel(tasks), plain_model = MakeModel(tasks);
  privacy::DPConfig dp;
  dp.noise_multiplier = 0.0;
  dp.clip_threshold = kInf;
  dp.target_epsilon = kInf;
  TrainerOptions o = Options();
  o.select_best = false;
  Trainer(private_model, tasks, o).TrainInputObfuscation(d, dp, 2, 11);
  Trainer(plain_model, tasks, o).TrainTaskPrivacy(d, 2, 11);
  EXPECT_LT(MaxRelativeDiff(private_model, plain_model), 1e-6);
}

TEST(TrainerTest, ZeroEpochsLeavesModelAndLedgerUntouched) {
  const data::Dataset d = Pair(16);
  auto tasks = TwoTasks();
  model::MultiTaskModel m = MakeModel(tasks);
  const auto before = nn::HashValues(m.AllParameters());
  privacy::DPConfig dp;
  const TrainingResult r = Trainer(m, tasks, Options()).TrainInputObfuscation(d, dp, 0, 1);
  EXPECT_EQ(nn::HashValues(m.AllParameters()), before);
  ASSERT_TRUE(r.ledger.has_value());
  EXPECT_EQ(r.ledger->steps(), 0);
  EXPECT_EQ(r.ledger->Epsilon(), 0.0);
  EXPECT_TRUE(r.history.empty());
}

TEST(TrainerTest, CalibratedRunStaysWithinBudget) {
  const data::Dataset d = Pair(80);
  auto tasks = TwoTasks();
  tasks.resize(1);
  model::MultiTaskModel m = MakeModel(tasks);
  TrainerOptions o = Options();
  o.batch_size = 16;
  privacy::DPConfig dp;
  dp.clip_threshold = 1.2;
  dp.target_epsilon = 4.0;
  dp.target_delta = 1e-5;
  dp = AccountingConfig(dp, d.size(), o.batch_size);
  dp.noise_multiplier = privacy::CalibrateSigma(dp, 5 * StepsPerEpoch(d.size(), o.batch_size));
  const TrainingResult r = Trainer(m, tasks, o).TrainInputObfuscation(d, dp, 5, 2);
  EXPECT_EQ(r.status, TrainStatus::kCompleted);
  EXPECT_EQ(r.ledger->steps(), 25);
  EXPECT_LE(r.ledger->Epsilon(), 4.0);
  EXPECT_GT(r.ledger->Epsilon(), 3.5);
  ASSERT_EQ(r.history.size(), 5u);
  EXPECT_NEAR(r.history.back().epsilon, r.ledger->Epsilon(), 1e-12);
}

TEST(TrainerTest, BudgetExhaustionHaltsBeforeOverspending) {
  const data::Dataset d = Pair(64);
  auto tasks = TwoTasks();
  tasks.resize(1);
  model::MultiTaskModel m = MakeModel(tasks);
  privacy::DPConfig dp;
  dp.noise_multiplier = 0.6;
  dp.target_epsilon = 2.0;
  const TrainingResult r = Trainer(m, tasks, Options()).TrainInputObfuscation(d, dp, 50, 2);
  EXPECT_EQ(r.status, TrainStatus::kBudgetExhausted);
  EXPECT_LE(r.ledger->Epsilon(), 2.0);
  EXPECT_LT(r.ledger->steps(), 50 * 8);
  privacy::PrivacyLedger one_more = *r.ledger;
  one_more.Step();
  EXPECT_GT(one_more.Epsilon(), 2.0);
}

TEST(TrainerTest, ZeroOmegaReportsOnlyTaskLosses) {
  const data::Dataset d = Pair(16);
  auto tasks = TwoTasks();
  model::MultiTaskModel m = MakeModel(tasks);
  const TrainingResult r = Trainer(m, tasks, Options(0.0)).TrainTaskPrivacy(d, 1, 4);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.history[0].tp_loss, 0.0);
  EXPECT_TRUE(std::isfinite(r.history[0].task_loss[0]));
  EXPECT_TRUE(std::isfinite(r.history[0].task_loss[1]));
}

TEST(TrainerTest, SameSeedReproducesBitForBit) {
  const data::Dataset d = Pair(16);
  auto tasks = TwoTasks();
  model::MultiTaskModel a = MakeModel(tasks), b = MakeModel(tasks);
  const auto ra = Trainer(a, tasks, Options(0.001)).TrainTaskPrivacy(d, 2, 9);
  const auto rb = Trainer(b, tasks, Options(0.001)).TrainTaskPrivacy(d, 2, 9);
  EXPECT_EQ(nn::HashValues(a.AllParameters()), nn::HashValues(b.AllParameters()));
  EXPECT_EQ(ra.history.back().task_loss, rb.history.back().task_loss);
  EXPECT_EQ(ra.history.back().tp_loss, rb.history.back().tp_loss);
}

TEST(TrainerTest, SingleTaskWithOmegaWarns) {
  const data::Dataset d = Pair(8);
  auto tasks = TwoTasks();
  tasks.resize(1);
  model::MultiTaskModel m = MakeModel(tasks);
  const auto r = Trainer(m, tasks, Options(0.5)).TrainTaskPrivacy(d, 1, 1);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.history[0].tp_loss, 0.0);
}

TEST(TrainerTest, TwoPhaseRequiresOnePrivateTask) {
  const data::Dataset d = Pair(8);
  auto tasks = TwoTasks(false);
  model::MultiTaskModel m = MakeModel(tasks);
  privacy::DPConfig dp;
  TrainingRegime regime;
  regime.kind = RegimeKind::kTwoPhase;
  try {
    Trainer(m, tasks, Options()).Run(regime, d, &dp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
  auto private_tasks = TwoTasks(true);
  regime.kind = RegimeKind::kTaskPrivacyOnly;
  model::MultiTaskModel m2 = MakeModel(private_tasks);
  EXPECT_THROW(Trainer(m2, private_tasks, Options()).Run(regime, d, nullptr), Error);
}

TEST(TrainerTest, TwoPhaseFreezesEncoderAndPrivateBranch) {
  const data::Dataset d = Pair(24);
  auto tasks = TwoTasks(true);
  privacy::DPConfig dp;
  dp.noise_multiplier = 1.0;
  dp.target_epsilon = 50.0;
  TrainingRegime regime;
  regime.kind = RegimeKind::kTwoPhase;
  regime.phase1_epochs = 1;
  regime.phase2_epochs = 0;
  regime.seed = 5;

  model::MultiTaskModel only_phase1 = MakeModel(tasks);
  const auto untouched_head = nn::HashValues(only_phase1.HeadParameters(1));
  Trainer(only_phase1, tasks, Options(0.001)).Run(regime, d, &dp);
  EXPECT_EQ(nn::HashValues(only_phase1.HeadParameters(1)), untouched_head);
  EXPECT_EQ(nn::HashValues(only_phase1.MetamorphParameters(1)),
            nn::HashValues(MakeModel(tasks).MetamorphParameters(1)));

  regime.phase2_epochs = 2;
  model::MultiTaskModel both = MakeModel(tasks);
  const auto r = Trainer(both, tasks, Options(0.001)).Run(regime, d, &dp);
  EXPECT_EQ(r.status, TrainStatus::kCompleted);
  EXPECT_EQ(nn::HashValues(both.EncoderParameters()),
            nn::HashValues(only_phase1.EncoderParameters()));
  EXPECT_EQ(nn::HashValues(both.MetamorphParameters(0)),
            nn::HashValues(only_phase1.MetamorphParameters(0)));
  EXPECT_EQ(nn::HashValues(both.HeadParameters(0)),
            nn::HashValues(only_phase1.HeadParameters(0)));
  EXPECT_NE(nn::HashValues(both.HeadParameters(1)), untouched_head);
  EXPECT_GT(r.history.back().tp_loss, 0.0);
  EXPECT_TRUE(std::isnan(r.history.back().task_loss[0]));
}

TEST(TrainerTest, UnfrozenPhaseTwoMovesEncoderAndWarns) {
  const data::Dataset d = Pair(16);
  auto tasks = TwoTasks(true);
  privacy::DPConfig dp;
  dp.target_epsilon = 50.0;
  TrainingRegime regime;
  regime.kind = RegimeKind::kTwoPhase;
  regime.phase1_epochs = 0;
  regime.phase2_epochs = 1;
  regime.freeze_encoder_phase2 = false;
  model::MultiTaskModel m = MakeModel(tasks);
  const auto before = nn::HashValues(m.EncoderParameters());
  const auto r = Trainer(m, tasks, Options(0.001)).Run(regime, d, &dp);
  EXPECT_NE(nn::HashValues(m.EncoderParameters()), before);
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(TrainerTest, AddTaskTouchesOnlyTheNewBranch) {
  const data::Dataset d = Pair(16);
  auto tasks = TwoTasks();
  tasks.resize(1);
  model::MultiTaskModel m = MakeModel(tasks);
  Trainer trainer(m, tasks, Options(0.001));
  trainer.TrainTaskPrivacy(d, 1, 1);
  const auto before = nn::HashValues(m.AllParameters());
  TaskSpec color{"color", model::TaskKind::kClassification, 2,
                 objectives::LossKind::kCrossEntropy, false, {}};
  const auto r = trainer.AddTask(color, d, 1, 2);
  ASSERT_EQ(m.num_tasks(), 2u);
  std::vector<nn::Parameter*> old;
  for (auto* p : m.AllParameters())
    if (p->name.find("/color/") == std::string::npos) old.push_back(p);
  EXPECT_EQ(nn::HashValues(old), before);
  // One frozen task gives two ordered pairs: tp = 2 * SSIM.
  EXPECT_GT(r.history[0].tp_loss, 0.0);
  EXPECT_LE(r.history[0].tp_loss, 2.0);
  EXPECT_THROW(trainer.AddTask(color, d, 1, 2), Error);
}

TEST(TrainerTest, MismatchedImagesAreRejected) {
  data::SyntheticSceneConfig c;
  c.num_samples = 4;
  c.height = 40;
  const data::Dataset d = data::GenerateClassificationPair(c);
  auto tasks = TwoTasks();
  model::MultiTaskModel m = MakeModel(tasks);
  EXPECT_THROW(Trainer(m, tasks, Options()).TrainTaskPrivacy(d, 1, 1), Error);
}

}  // namespace
}  // namespace mtsplit::train
