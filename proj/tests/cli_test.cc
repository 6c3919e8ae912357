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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <cstring>
#include <future>
#include <thread>

#include <gtest/gtest.h>

#include "mtsplit/cli/checkpoint.h"
#include "mtsplit/cli/commands.h"
#include "mtsplit/cli/config.h"
#include "mtsplit/error.h"

namespace mtsplit::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json BaseDoc() {
  return json::parse(R"({
    "seed": 4,
    "dataset": {"kind": "synthetic_classification", "num_samples": 64, "test_samples": 32},
    "tasks": [
      {"task_id": "color", "kind": "classification", "num_outputs": 2, "is_private": true},
      {"task_id": "shape", "kind": "classification", "num_outputs": 2}
    ],
    "dp": {"clip_threshold": 1.2, "noise_multiplier": 1.0, "target_epsilon": 50, "target_delta": 1e-5},
    "weights": {"omega": 0.001},
    "regime": {"kind": "two_phase", "phase1_epochs": 1, "phase2_epochs": 1},
    "training": {"batch_size": 16, "learning_rate": 1e-3},
    "attack": {"epochs": 1, "train_samples": 32, "test_samples": 8},
    "runtime": {"key": "k", "task_id": "shape", "timeout_seconds": 20}
  })");
}

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mtsplit_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ErrorKind KindOf(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kData;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(ConfigTest, RoundTripsThroughJson) {
  const auto c = ParseConfig(BaseDoc());
  const json once = ConfigToJson(c);
  const json twice = ConfigToJson(ParseConfig(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(c.tasks.size(), 2u);
  EXPECT_TRUE(c.tasks[0].is_private);
  EXPECT_EQ(c.regime.seed, 4u);
  EXPECT_EQ(c.dataset.scene.seed, 4u);
}

TEST(ConfigTest, UnknownFieldIsNamedWithItsPath) {
  std::string msg;
  auto doc = BaseDoc();
  doc["dp"]["sigma"] = 1.0;
  EXPECT_EQ(KindOf([&] { ParseConfig(doc); }, &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("dp.sigma"), std::string::npos) << msg;

  doc = BaseDoc();
  doc["tasks"][1]["colour"] = 1;
  EXPECT_EQ(KindOf([&] { ParseConfig(doc); }, &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("tasks[1].colour"), std::string::npos) << msg;

  doc = BaseDoc();
  doc["extra"] = true;
  EXPECT_EQ(KindOf([&] { ParseConfig(doc); }, &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("'extra'"), std::string::npos) << msg;
}

TEST(ConfigTest, PrivacyFieldsMustBeExplicit) {
  for (const char* field : {"clip_threshold", "target_delta"}) {
    auto doc = BaseDoc();
    doc["dp"].erase(field);
    std::string msg;
    EXPECT_EQ(KindOf([&] { ParseConfig(doc); }, &msg), ErrorKind::kConfig);
    EXPECT_NE(msg.find(std::string("dp.") + field), std::string::npos) << msg;
  }
  auto doc = BaseDoc();
  doc["dp"].erase("noise_multiplier");
  doc["dp"].erase("target_epsilon");
  EXPECT_EQ(KindOf([&] { ParseConfig(doc); }), ErrorKind::kConfig);

  doc = BaseDoc();
  doc["weights"].erase("omega");
  std::string msg;
  EXPECT_EQ(KindOf([&] { ParseConfig(doc); }, &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("weights.omega"), std::string::npos) << msg;

  doc = BaseDoc();
  doc.erase("dp");
  EXPECT_EQ(KindOf([&] { ParseConfig(doc); }, &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("dp"), std::string::npos);
}

TEST(ConfigTest, TypeAndValueErrorsCarryPaths) {
  std::string msg;
  auto doc = BaseDoc();
  doc["training"]["batch_size"] = 1.5;
  EXPECT_EQ(KindOf([&] { ParseConfig(doc); }, &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("training.batch_size"), std::string::npos) << msg;

  doc = BaseDoc();
  doc["tasks"][0]["kind"] = "colour-ish";
  EXPECT_EQ(KindOf([&] { ParseConfig(doc); }, &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("tasks[0].kind"), std::string::npos) << msg;

  doc = BaseDoc();
  doc["tasks"][1]["task_id"] = "color";
  EXPECT_EQ(KindOf([&] { ParseConfig(doc); }, &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("tasks"), std::string::npos) << msg;

  doc = BaseDoc();
  doc["metamorph"] = {{"k", 5}};
  EXPECT_EQ(KindOf([&] { ParseConfig(doc); }, &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("metamorph"), std::string::npos) << msg;
}

TEST(ConfigTest, OverridesFollowDottedPaths) {
  auto doc = BaseDoc();
  ApplyOverride(doc, "dp.clip_threshold=0.5");
  ApplyOverride(doc, "tasks.1.num_outputs=3");
  ApplyOverride(doc, "runtime.key=secret phrase");
  ApplyOverride(doc, "output.dir=somewhere");
  const auto c = ParseConfig(doc);
  EXPECT_DOUBLE_EQ(c.dp->clip_threshold, 0.5);
  EXPECT_EQ(c.tasks[1].num_outputs, 3);
  EXPECT_EQ(c.runtime.key, "secret phrase");
  EXPECT_EQ(c.output_dir, "somewhere");
  EXPECT_EQ(KindOf([&] { ApplyOverride(doc, "novalue"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([&] { ApplyOverride(doc, "tasks.9.kind=x"); }), ErrorKind::kConfig);
}

TEST(ConfigTest, SigmaOnlyLeavesTheLedgerUnbounded) {
  auto doc = BaseDoc();
  doc["dp"].erase("target_epsilon");
  const auto dp = ResolveDp(ParseConfig(doc), 64);
  EXPECT_DOUBLE_EQ(dp.noise_multiplier, 1.0);
  EXPECT_TRUE(std::isinf(dp.target_epsilon));
  EXPECT_DOUBLE_EQ(dp.sample_rate, 16.0 / 64.0);
}

TEST(ConfigTest, EpsilonOnlyCalibratesSigmaForPlannedSteps) {
  auto doc = BaseDoc();
  doc["dp"].erase("noise_multiplier");
  doc["dp"]["target_epsilon"] = 4.0;
  doc["regime"]["phase1_epochs"] = 3;
  const auto c = ParseConfig(doc);
  EXPECT_EQ(PlannedDpSteps(c, 64), 12);
  const auto dp = ResolveDp(c, 64);
  const double eps = privacy::ComputeEpsilon(dp.sample_rate, dp.noise_multiplier, 12, 1e-5);
  EXPECT_LE(eps, 4.0);
  EXPECT_GT(eps, 3.9);
}

TEST(CheckpointTest, RoundTripsExactly) {
  Checkpoint ck;
  ck.metadata = {{"status", "completed"}, {"n", 3}};
  ck.arrays.emplace_back("encoder/w", Tensor({2, 3}, {1, -2, 3.5f, 1e-20f, -0.0f, 7}));
  ck.arrays.emplace_back("head/shape/b", Tensor({4}, 0.25f));
  const auto bytes = EncodeCheckpoint(ck);
  const auto back = DecodeCheckpoint(bytes);
  EXPECT_EQ(back.metadata, ck.metadata);
  ASSERT_EQ(back.arrays.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.arrays[i].first, ck.arrays[i].first);
    EXPECT_EQ(back.arrays[i].second.shape(), ck.arrays[i].second.shape());
    EXPECT_EQ(std::memcmp(back.arrays[i].second.data(), ck.arrays[i].second.data(),
                          ck.arrays[i].second.size() * 4),
              0);
  }
  EXPECT_EQ(EncodeCheckpoint(back), bytes);
}

TEST(CheckpointTest, AnyFlippedByteIsAnIntegrityError) {
  Checkpoint ck;
  ck.metadata = {{"k", "v"}};
  ck.arrays.emplace_back("a", Tensor({3}, 1.0f));
  const auto bytes = EncodeCheckpoint(ck);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    auto bad = bytes;
    bad[i] ^= 0x10;
    EXPECT_EQ(KindOf([&] { DecodeCheckpoint(bad); }), ErrorKind::kCorruption) << i;
  }
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<long>(n));
    EXPECT_EQ(KindOf([&] { DecodeCheckpoint(cut); }), ErrorKind::kCorruption) << n;
  }
}

TEST(CheckpointTest, ParametersMustMatchTheModel) {
  const auto c = ParseConfig(BaseDoc());
  auto model = BuildModel(c);
  Checkpoint ck;
  StoreParameters(model, ck);
  auto other = BuildModel(ParseConfig([] {
    auto d = BaseDoc();
    d["seed"] = 99;
    return d;
  }()));
  LoadParameters(ck, other);
  const auto a = model.AllParameters();
  const auto b = other.AllParameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(MaxAbsDiff(a[i]->value, b[i]->value), 0.0);

  ck.arrays.pop_back();
  EXPECT_EQ(KindOf([&] { LoadParameters(ck, other); }), ErrorKind::kCorruption);
  Checkpoint wrong;
  StoreParameters(model, wrong);
  wrong.arrays[0].second = Tensor({1});
  EXPECT_EQ(KindOf([&] { LoadParameters(wrong, other); }), ErrorKind::kCorruption);
}

TEST(TrainCommandTest, WritesArtifactsAndRepeatsUnderASeed) {
  auto c = ParseConfig(BaseDoc());
  std::ostringstream log;
  c.output_dir = TempDir("train_a").string();
  const json a = RunTrain(c, log);
  c.output_dir = TempDir("train_b").string();
  const json b = RunTrain(c, log);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a["status"], "completed");
  EXPECT_EQ(a["tasks"].size(), 2u);
  EXPECT_TRUE(a["tasks"][1]["value"].is_number());
  EXPECT_TRUE(a["final_tp_loss"].is_number());
  EXPECT_GT(a["privacy"]["epsilon"].get<double>(), 0.0);
  const fs::path first = fs::temp_directory_path() / "mtsplit_cli_train_a";
  for (const char* f : {"metrics.csv", "report.json", "report.txt"})
    EXPECT_EQ(ReadFile(fs::path(c.output_dir) / f), ReadFile(first / f)) << f;
  // The archives differ only in the recorded output directory.
  const auto ca = ReadCheckpoint(first / "checkpoint.mmck");
  const auto cb = ReadCheckpoint(fs::path(c.output_dir) / "checkpoint.mmck");
  ASSERT_EQ(ca.arrays.size(), cb.arrays.size());
  for (std::size_t i = 0; i < ca.arrays.size(); ++i)
    EXPECT_EQ(MaxAbsDiff(ca.arrays[i].second, cb.arrays[i].second), 0.0);
  EXPECT_EQ(ca.metadata["history"], cb.metadata["history"]);
  const auto ck = ReadCheckpoint(fs::path(c.output_dir) / "checkpoint.mmck");
  EXPECT_EQ(ck.metadata["status"], "completed");
  EXPECT_TRUE(ck.metadata["ledger"].is_string());
  const auto ledger = privacy::PrivacyLedger::Deserialize(ck.metadata["ledger"]);
  EXPECT_EQ(ledger.steps(), 4);
}

TEST(TrainCommandTest, TaskPrivacyReportHasAccuracyAndTpLoss) {
  auto doc = BaseDoc();
  doc.erase("dp");
  doc["tasks"][0]["is_private"] = false;
  doc["regime"] = {{"kind", "task_privacy_only"}, {"phase1_epochs", 1}};
  auto c = ParseConfig(doc);
  c.output_dir = TempDir("train_tp").string();
  std::ostringstream log;
  const json r = RunTrain(c, log);
  EXPECT_EQ(r["tasks"][0]["metric"], "accuracy");
  EXPECT_GT(r["final_tp_loss"].get<double>(), 0.0);
  EXPECT_TRUE(r["privacy"].is_null());
}

TEST(TrainCommandTest, BudgetExhaustionLeavesAPartialCheckpoint) {
  auto doc = BaseDoc();
  doc["dp"]["target_epsilon"] = 3.0;
  doc["dp"]["noise_multiplier"] = 0.8;
  doc["regime"]["phase1_epochs"] = 20;
  auto c = ParseConfig(doc);
  c.output_dir = TempDir("train_budget").string();
  std::ostringstream log;
  const json r = RunTrain(c, log);
  EXPECT_EQ(r["status"], "budget_exhausted");
  EXPECT_LE(r["privacy"]["epsilon"].get<double>(), 3.0);
  const auto ck = ReadCheckpoint(fs::path(c.output_dir) / "checkpoint.mmck");
  EXPECT_EQ(ck.metadata["status"], "budget_exhausted");
}

TEST(EvalInterchangeCommandTest, ThreeTaskCheckpointGivesThreeByThree) {
  // An image folder with a third label column derived from the other two.
  const fs::path dir = TempDir("interchange");
  auto doc = BaseDoc();
  doc["dataset"]["num_samples"] = 48;
  doc["dataset"]["test_samples"] = 0;
  std::ostringstream log;
  RunGenData(ParseConfig(doc), dir / "data", log);
  {
    std::ifstream in(dir / "data" / "train" / "labels.csv");
    std::ofstream out(dir / "data" / "train" / "labels3.csv");
    std::string line;
    std::getline(in, line);
    out << line << ",parity\n";
    while (std::getline(in, line)) {
      const auto a = line.find(','), b = line.rfind(',');
      const int s = std::stoi(line.substr(a + 1, b - a - 1)), col = std::stoi(line.substr(b + 1));
      out << line << ',' << (s + col) % 2 << '\n';
    }
  }
  doc["dataset"] = {{"kind", "image_folder"},
                    {"folder", (dir / "data" / "train").string()},
                    {"labels_csv", (dir / "data" / "train" / "labels3.csv").string()}};
  doc["tasks"].push_back({{"task_id", "parity"}, {"kind", "classification"}, {"num_outputs", 2}});
  doc.erase("dp");
  doc["tasks"][0]["is_private"] = false;
  doc["regime"] = {{"kind", "task_privacy_only"}, {"phase1_epochs", 1}};
  doc["output"] = {{"dir", (dir / "run").string()}};
  RunTrain(ParseConfig(doc), log);

  const json r = RunEvalInterchange(dir / "run" / "checkpoint.mmck", {}, dir / "eval", log);
  EXPECT_EQ(r["cells"].size(), 9u);
  const std::string text = ReadFile(dir / "eval" / "interchange.txt");
  std::size_t cells = 0;
  for (std::size_t p = text.find("cell "); p != std::string::npos; p = text.find("cell ", p + 1))
    ++cells;
  EXPECT_EQ(cells, 9u);
  EXPECT_TRUE(fs::exists(dir / "eval" / "interchange.csv"));
  EXPECT_TRUE(fs::exists(dir / "eval" / "embeddings.csv"));

  // Corrupt one byte: integrity error.
  auto bytes = ReadFile(dir / "run" / "checkpoint.mmck");
  bytes[bytes.size() / 2] ^= 1;
  std::ofstream(dir / "bad.mmck", std::ios::binary) << bytes;
  EXPECT_EQ(KindOf([&] { RunEvalInterchange(dir / "bad.mmck", {}, dir / "eval2", log); }),
            ErrorKind::kCorruption);
}

TEST(AttackCommandTest, WritesReportAndGrid) {
  auto c = ParseConfig(BaseDoc());
  const fs::path dir = TempDir("attack");
  c.output_dir = (dir / "run").string();
  std::ostringstream log;
  RunTrain(c, log);
  const fs::path ck = dir / "run" / "checkpoint.mmck";
  const json r = RunAttackReconstruct(ck, ck, {}, dir / "out", log);
  EXPECT_EQ(r["private_untrained"]["attack_epochs"], 0);
  EXPECT_EQ(r["private_trained"]["scores"].size(), 8u);
  EXPECT_EQ(r["grid_rows"].size(), 4u);
  // Same checkpoint twice: the reference and private trained attacks agree.
  EXPECT_EQ(r["non_private_trained"]["scores"], r["private_trained"]["scores"]);
  EXPECT_TRUE(fs::exists(dir / "out" / "reconstruction_grid.png"));
  const auto grid = data::ReadImage(dir / "out" / "reconstruction_grid.png");
  EXPECT_GT(grid.dim(1), 4 * 32);
}

struct SessionPair {
  runtime::SessionOutcome producer, consumer;
};

SessionPair RunSession(ExperimentConfig producer, ExperimentConfig consumer, bool echo = false,
                       std::vector<std::size_t> probe = {}) {
  std::promise<int> port;
  auto ready = port.get_future();
  ServeOptions options;
  options.probe_bytes = probe;
  options.probe_repetitions = 5;
  options.on_listening = [&](int p) { port.set_value(p); };
  producer.runtime.listen = "127.0.0.1:0";
  SessionPair out;
  std::ostringstream plog, clog;
  std::thread server([&] { out.producer = RunServe(producer, options, plog); });
  consumer.runtime.connect = "127.0.0.1:" + std::to_string(ready.get());
  out.consumer = RunConsume(consumer, echo, clog);
  server.join();
  return out;
}

TEST(SessionCommandTest, LoopbackEpochGivesMatchingBatchCounts) {
  auto c = ParseConfig(BaseDoc());
  auto p = c, q = c;
  p.output_dir = TempDir("serve").string();
  q.output_dir = TempDir("consume").string();
  const auto r = RunSession(p, q);
  EXPECT_EQ(r.producer.status, runtime::SessionStatus::kCompleted);
  EXPECT_EQ(r.consumer.status, runtime::SessionStatus::kCompleted);
  EXPECT_EQ(r.producer.batches, 4);
  EXPECT_EQ(r.producer.batches, r.consumer.batches);
  for (const char* f : {"session.json", "rtt.csv", "rtt_summary.csv", "checkpoint.mmck"})
    EXPECT_TRUE(fs::exists(fs::path(p.output_dir) / f)) << f;
  const json s = json::parse(ReadFile(fs::path(q.output_dir) / "session.json"));
  EXPECT_EQ(s["batches"], 4);
}

TEST(SessionCommandTest, MismatchedKeysAbortBeforeFeatures) {
  auto c = ParseConfig(BaseDoc());
  auto p = c, q = c;
  q.runtime.key = "other";
  p.output_dir = TempDir("serve_key").string();
  q.output_dir = TempDir("consume_key").string();
  const auto r = RunSession(p, q);
  EXPECT_EQ(r.producer.status, runtime::SessionStatus::kAborted);
  EXPECT_EQ(r.consumer.status, runtime::SessionStatus::kAborted);
  EXPECT_EQ(r.producer.batches, 0);
  EXPECT_TRUE(r.producer.rtt.empty());
}

TEST(SessionCommandTest, ProbeSummaryIsOrderedByPayload) {
  auto c = ParseConfig(BaseDoc());
  auto p = c, q = c;
  p.output_dir = TempDir("probe").string();
  q.output_dir = TempDir("echo").string();
  const auto r = RunSession(p, q, true, {65536, 2048, 16384});
  EXPECT_EQ(r.consumer.batches, 15);
  const std::string csv = ReadFile(fs::path(p.output_dir) / "rtt_summary.csv");
  const auto a = csv.find("\n2048,"), b = csv.find("\n16384,"), d = csv.find("\n65536,");
  ASSERT_NE(a, std::string::npos);
  EXPECT_LT(a, b);
  EXPECT_LT(b, d);
}

TEST(AccountantCommandTest, PrintsEpsilonAndSigma) {
  const double eps = std::stod(AccountantEpsilon(0.01, 1.1, 1000, 1e-5));
  EXPECT_NEAR(eps, privacy::ComputeEpsilon(0.01, 1.1, 1000, 1e-5), 1e-8);
  EXPECT_EQ(std::stod(AccountantEpsilon(0.01, 1.1, 0, 1e-5)), 0.0);
  const double sigma = std::stod(AccountantSigma(0.01, 4.0, 1000, 1e-5));
  EXPECT_LE(privacy::ComputeEpsilon(0.01, sigma, 1000, 1e-5), 4.0 + 1e-9);
  EXPECT_EQ(KindOf([] { AccountantSigma(0.01, 1e-9, 1000, 1e-5); }), ErrorKind::kCalibration);
  EXPECT_EQ(ExitCodeFor(ErrorKind::kCalibration), kExitConfig);
  EXPECT_EQ(KindOf([] { AccountantEpsilon(1.5, 1.0, 10, 1e-5); }), ErrorKind::kConfig);
}

TEST(GenDataCommandTest, WritesLoadableFolderAndRejectsDense) {
  auto doc = BaseDoc();
  doc["dataset"]["num_samples"] = 12;
  doc["dataset"]["test_samples"] = 4;
  const fs::path dir = TempDir("gen");
  std::ostringstream log;
  const auto c = ParseConfig(doc);
  RunGenData(c, dir, log);
  data::ImageFolderConfig img;
  img.mean = {0, 0, 0};
  img.stddev = {1, 1, 1};
  const auto ds = data::LoadImageFolder(dir / "train", dir / "train" / "labels.csv", img);
  const auto ref = LoadData(c).train;
  ASSERT_EQ(ds.size(), 12);
  EXPECT_EQ(ds.Target("shape").labels, ref.Target("shape").labels);
  EXPECT_LE(MaxAbsDiff(ds.images, ref.images), 0.5 / 255.0 + 1e-6);

  doc["dataset"]["kind"] = "synthetic_dense";
  doc["tasks"] = json::parse(R"([{"task_id": "segmentation", "kind": "segmentation", "num_outputs": 3},
                                 {"task_id": "depth", "kind": "dense_regression", "num_outputs": 1}])");
  doc.erase("dp");
  doc["regime"] = {{"kind", "task_privacy_only"}};
  doc["runtime"].erase("task_id");
  EXPECT_EQ(KindOf([&] { RunGenData(ParseConfig(doc), dir / "dense", log); }),
            ErrorKind::kConfig);
}

}  // namespace
}  // namespace mtsplit::cli
