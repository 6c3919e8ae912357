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

#include "mtsplit/cli/commands.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mtsplit/attacks/evaluation.h"
#include "mtsplit/data/image_io.h"
#include "mtsplit/error.h"
#include "mtsplit/privacy/accountant.h"
#include "mtsplit/runtime/transport.h"

namespace mtsplit::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr char kCheckpointName[] = "checkpoint.mmck";

std::ofstream OpenOut(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  Require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  out << std::setprecision(9);
  return out;
}

void WriteText(const fs::path& path, const std::string& text) {
  auto out = OpenOut(path);
  out << text;
  Require(out.good(), ErrorKind::kIo, "write failed for " + path.string());
}

// JSON cannot carry NaN or infinity; those become null.
json Number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string Fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

const data::Dataset& EvalSplit(const DataSplits& s) {
  return s.test.size() > 0 ? s.test : s.train;
}

std::size_t SessionTask(const ExperimentConfig& c) {
  if (c.runtime.task_id.empty()) return 0;
  for (std::size_t i = 0; i < c.tasks.size(); ++i)
    if (c.tasks[i].task_id == c.runtime.task_id) return i;
  Fail(ErrorKind::kConfig, "runtime.task_id: unknown task '" + c.runtime.task_id + "'");
}

runtime::SessionConfig SessionFor(const ExperimentConfig& c) {
  runtime::SessionConfig s;
  s.session_id = c.runtime.session_id;
  s.key = c.runtime.key;
  s.task_id = c.tasks[SessionTask(c)].task_id;
  s.wire_dtype = runtime::ParseDType(c.runtime.wire_dtype);
  s.batch_size = c.training.batch_size;
  s.epochs = c.runtime.epochs;
  s.seed = c.seed;
  s.augment_flip = c.training.augment_flip;
  s.timeout_seconds = c.runtime.timeout_seconds;
  s.max_batches = c.runtime.max_batches;
  Require(!s.key.empty(), ErrorKind::kConfig, "runtime.key: a pre-shared key is required");
  runtime::ValidateSessionConfig(s);
  return s;
}

json HistoryJson(const std::vector<train::EpochRecord>& history,
                 const std::vector<train::TaskSpec>& tasks) {
  json rows = json::array();
  for (const auto& r : history) {
    json losses = json::object();
    for (std::size_t i = 0; i < r.task_loss.size() && i < tasks.size(); ++i)
      losses[tasks[i].task_id] = Number(r.task_loss[i]);
    rows.push_back({{"phase", r.phase},
                    {"epoch", r.epoch},
                    {"task_loss", losses},
                    {"tp_loss", Number(r.tp_loss)},
                    {"epsilon", Number(r.epsilon)},
                    {"dp_steps", r.dp_steps}});
  }
  return rows;
}

json LedgerJson(const std::optional<privacy::PrivacyLedger>& ledger) {
  if (!ledger) return nullptr;
  return {{"epsilon", Number(ledger->Epsilon())},
          {"delta", ledger->config().target_delta},
          {"target_epsilon", Number(ledger->config().target_epsilon)},
          {"noise_multiplier", ledger->config().noise_multiplier},
          {"sample_rate", ledger->config().sample_rate},
          {"clip_threshold", ledger->config().clip_threshold},
          {"steps", ledger->steps()}};
}

// Encoder features over a whole image tensor, in slices.
Tensor EncodeAll(model::MultiTaskModel& m, const Tensor& images, int batch = 64) {
  const int n = images.dim(0);
  Tensor out;
  for (int begin = 0; begin < n; begin += batch) {
    const int end = std::min(n, begin + batch);
    const Tensor part = m.Encode(images.Slice(begin, end));
    if (out.empty()) {
      Shape shape = part.shape();
      shape[0] = n;
      out = Tensor(shape);
    }
    std::copy(part.values().begin(), part.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(begin * part.SampleSize()));
  }
  return out;
}

// Images in [0, 1] for the attack plus the matching encoder input transform.
struct AttackImages {
  Tensor train;
  Tensor test;
};

Tensor Denormalize(Tensor images, const data::ImageFolderConfig& cfg, bool inverse) {
  const int n = images.dim(0), h = images.dim(2), w = images.dim(3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          float& v = images.at(i, c, y, x);
          v = inverse ? static_cast<float>((v - cfg.mean[c]) / cfg.stddev[c])
                      : static_cast<float>(v * cfg.stddev[c] + cfg.mean[c]);
        }
  return images;
}

AttackImages LoadAttackImages(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  AttackImages a;
  if (d.kind == DatasetKind::kImageFolder) {
    const auto splits = LoadData(c);
    const auto& test = EvalSplit(splits);
    const int ntr = std::min(c.attack.train_samples, splits.train.size());
    const int nte = std::min(c.attack.test_samples, test.size());
    a.train = Denormalize(splits.train.images.Slice(0, ntr), d.image, false);
    a.test = Denormalize(test.images.Slice(0, nte), d.image, false);
    return a;
  }
  // Fresh scenes from seeds disjoint from the training and test splits.
  auto gen = d.kind == DatasetKind::kSyntheticDense ? data::GenerateDensePair
                                                    : data::GenerateClassificationPair;
  data::SyntheticSceneConfig scene = d.scene;
  scene.num_samples = c.attack.train_samples;
  scene.seed = d.scene.seed + 2;
  a.train = gen(scene).images;
  scene.num_samples = c.attack.test_samples;
  scene.seed = d.scene.seed + 3;
  a.test = gen(scene).images;
  return a;
}

attacks::FeatureFn FeaturesOf(model::MultiTaskModel& m, const ExperimentConfig& c) {
  if (c.dataset.kind != DatasetKind::kImageFolder)
    return [&m](const Tensor& x) { return EncodeAll(m, x); };
  const auto image = c.dataset.image;
  return [&m, image](const Tensor& x) { return EncodeAll(m, Denormalize(x, image, true)); };
}

json ReconstructionJson(const attacks::ReconstructionReport& r) {
  return {{"attack_epochs", r.attack_epochs},
          {"encoder", attacks::EncoderPrivacyName(r.encoder_privacy)},
          {"mean_ssim", Number(r.mean_score)},
          {"scores", r.scores},
          {"train_loss", r.train_loss}};
}

json SessionJson(const runtime::SessionOutcome& o) {
  double loss_sum = 0.0;
  for (double l : o.batch_losses) loss_sum += l;
  json j = {{"status", runtime::SessionStatusName(o.status)},
            {"batches", o.batches},
            {"epochs_started", o.epochs_started},
            {"wire_dtype", runtime::DTypeName(o.wire_dtype)},
            {"mean_loss", o.batch_losses.empty()
                              ? json(nullptr)
                              : Number(loss_sum / static_cast<double>(o.batch_losses.size()))},
            {"rtt_records", o.rtt.size()},
            {"ledger", LedgerJson(o.ledger)},
            {"frames_sent", o.channel.frames_sent},
            {"frames_received", o.channel.frames_received},
            {"nacks_sent", o.channel.nacks_sent},
            {"resends", o.channel.resends}};
  if (!o.peer_metrics.empty()) {
    json peer = json::parse(o.peer_metrics, nullptr, false);
    j["peer_metrics"] = peer.is_discarded() ? json(o.peer_metrics) : peer;
  }
  if (o.error_kind) {
    j["error_kind"] = ErrorKindName(*o.error_kind);
    j["error"] = o.error;
  }
  return j;
}

void WriteRtt(const fs::path& dir, const std::vector<runtime::RttRecord>& records) {
  auto out = OpenOut(dir / "rtt.csv");
  out << "batch_index,payload_bytes,rtt_ms\n";
  for (const auto& r : records)
    out << r.batch_index << ',' << r.payload_bytes << ',' << r.rtt_ms << '\n';
  WriteRttSummary(dir / "rtt_summary.csv", runtime::MeasureRtt(records));
}

}  // namespace

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kCalibration:
      return kExitConfig;
    case ErrorKind::kBudgetExhausted:
      return kExitBudget;
    default:
      return kExitRuntime;
  }
}

model::MultiTaskModel BuildModel(const ExperimentConfig& c) {
  return model::MultiTaskModel(Architecture(c), train::HeadSpecs(c.tasks), c.seed);
}

LoadedModel LoadModel(const fs::path& checkpoint, const std::vector<std::string>& overrides) {
  const Checkpoint ck = ReadCheckpoint(checkpoint);
  Require(ck.metadata.contains("config"), ErrorKind::kCorruption,
          "checkpoint has no config snapshot");
  json doc = ck.metadata.at("config");
  for (const auto& o : overrides) ApplyOverride(doc, o);
  ExperimentConfig config = ParseConfig(doc);
  LoadedModel loaded{config, BuildModel(config)};
  LoadParameters(ck, loaded.model);
  return loaded;
}

json RunTrain(const ExperimentConfig& c, std::ostream& log) {
  const DataSplits splits = LoadData(c);
  model::MultiTaskModel model = BuildModel(c);
  train::Trainer trainer(model, c.tasks, TrainerOptionsFor(c));
  std::optional<privacy::DPConfig> dp;
  if (c.regime.kind != train::RegimeKind::kTaskPrivacyOnly) {
    dp = ResolveDp(c, splits.train.size());
    log << "dp: C=" << dp->clip_threshold << " sigma=" << dp->noise_multiplier
        << " q=" << dp->sample_rate << " delta=" << dp->target_delta << '\n';
  }
  trainer.SetEpochCallback([&](const train::EpochRecord& r) {
    log << r.phase << " epoch " << r.epoch;
    for (std::size_t i = 0; i < r.task_loss.size() && i < c.tasks.size(); ++i)
      if (std::isfinite(r.task_loss[i]))
        log << ' ' << c.tasks[i].task_id << '=' << Fixed(r.task_loss[i]);
    log << " tp=" << Fixed(r.tp_loss) << " eps=" << Fixed(r.epsilon, 3) << std::endl;
  });
  const train::TrainingResult result =
      trainer.Run(c.regime, splits.train, dp ? &*dp : nullptr);

  const fs::path dir = c.output_dir;
  fs::create_directories(dir);

  const data::Dataset& eval = EvalSplit(splits);
  json tasks = json::array();
  for (std::size_t i = 0; i < c.tasks.size(); ++i)
    tasks.push_back({{"task_id", c.tasks[i].task_id},
                     {"private", c.tasks[i].is_private},
                     {"metric", attacks::PrimaryMetric(c.tasks[i])},
                     {"value", Number(attacks::EvaluateTask(model, c.tasks, i, eval))}});
  const double tp = result.history.empty() ? 0.0 : result.history.back().tp_loss;
  json report = {{"status", train::TrainStatusName(result.status)},
                 {"regime", train::RegimeKindName(c.regime.kind)},
                 {"seed", c.seed},
                 {"train_samples", splits.train.size()},
                 {"eval_samples", eval.size()},
                 {"tasks", tasks},
                 {"final_tp_loss", Number(tp)},
                 {"omega", c.weights.omega},
                 {"privacy", LedgerJson(result.ledger)},
                 {"epochs", result.history.size()},
                 {"warnings", result.warnings}};

  Checkpoint ck;
  ck.metadata = {{"format", "mtsplit checkpoint"},
                 {"status", report["status"]},
                 {"config", ConfigToJson(c)},
                 {"ledger", result.ledger ? json(result.ledger->Serialize()) : json(nullptr)},
                 {"history", HistoryJson(result.history, c.tasks)}};
  StoreParameters(model, ck);
  WriteCheckpoint(dir / kCheckpointName, ck);

  {
    auto out = OpenOut(dir / "metrics.csv");
    out << "phase,epoch,task_id,loss,tp_loss,epsilon,dp_steps\n";
    for (const auto& r : result.history)
      for (std::size_t i = 0; i < r.task_loss.size() && i < c.tasks.size(); ++i) {
        if (!std::isfinite(r.task_loss[i])) continue;
        out << r.phase << ',' << r.epoch << ',' << c.tasks[i].task_id << ',' << r.task_loss[i]
            << ',' << r.tp_loss << ',' << r.epsilon << ',' << r.dp_steps << '\n';
      }
  }
  WriteText(dir / "report.json", report.dump(2) + "\n");

  std::ostringstream txt;
  txt << "status=" << report["status"].get<std::string>() << '\n'
      << "regime=" << report["regime"].get<std::string>() << '\n'
      << "final_tp_loss=" << Fixed(tp, 6) << '\n';
  if (result.ledger)
    txt << "epsilon=" << Fixed(result.ledger->Epsilon(), 4)
        << "\ndelta=" << result.ledger->config().target_delta
        << "\ndp_steps=" << result.ledger->steps() << '\n';
  for (const auto& t : tasks)
    txt << "task " << t["task_id"].get<std::string>() << ' ' << t["metric"].get<std::string>()
        << '=' << (t["value"].is_null() ? std::string("nan") : Fixed(t["value"].get<double>()))
        << '\n';
  txt << '\n' << std::left << std::setw(16) << "task" << std::setw(10) << "private"
      << std::setw(12) << "metric" << "value\n";
  for (const auto& t : tasks)
    txt << std::setw(16) << t["task_id"].get<std::string>() << std::setw(10)
        << (t["private"].get<bool>() ? "yes" : "no") << std::setw(12)
        << t["metric"].get<std::string>()
        << (t["value"].is_null() ? std::string("nan") : Fixed(t["value"].get<double>()))
        << '\n';
  WriteText(dir / "report.txt", txt.str());
  log << txt.str();
  return report;
}

json RunEvalInterchange(const fs::path& checkpoint, const std::vector<std::string>& overrides,
                        const fs::path& out_dir, std::ostream& log) {
  LoadedModel lm = LoadModel(checkpoint, overrides);
  const DataSplits splits = LoadData(lm.config);
  const data::Dataset& eval = EvalSplit(splits);
  const auto report = attacks::EvaluateInterchange(lm.model, lm.config.tasks, eval);

  fs::create_directories(out_dir);
  const std::string text = attacks::RenderInterchange(report);
  WriteText(out_dir / "interchange.txt", text);
  json cells = json::array();
  {
    auto out = OpenOut(out_dir / "interchange.csv");
    out << "module,classifier,metric,value\n";
    for (std::size_t m = 0; m < report.task_ids.size(); ++m)
      for (std::size_t k = 0; k < report.task_ids.size(); ++k) {
        out << report.task_ids[m] << ',' << report.task_ids[k] << ',' << report.metrics[k]
            << ',' << report.values[m][k] << '\n';
        cells.push_back({{"module", report.task_ids[m]},
                         {"classifier", report.task_ids[k]},
                         {"metric", report.metrics[k]},
                         {"value", Number(report.values[m][k])}});
      }
  }
  const int n = std::min(eval.size(), 100);
  attacks::ExportEmbeddings(lm.model, eval.images.Slice(0, n), out_dir / "embeddings.csv");
  log << text;
  return {{"tasks", report.task_ids}, {"cells", cells}};
}

json RunAttackReconstruct(const fs::path& checkpoint, const std::optional<fs::path>& reference,
                          const std::vector<std::string>& overrides, const fs::path& out_dir,
                          std::ostream& log) {
  LoadedModel priv = LoadModel(checkpoint, overrides);
  const ExperimentConfig& c = priv.config;
  const AttackImages images = LoadAttackImages(c);
  attacks::AttackConfig cfg = c.attack.attack;
  attacks::AttackConfig untrained = cfg;
  untrained.epochs = 0;

  const auto private_features = FeaturesOf(priv.model, c);
  Tensor recon_untrained, recon_trained, recon_reference;
  const auto r0 = attacks::ReconstructionAttack(private_features, images.train, images.test,
                                                untrained, attacks::EncoderPrivacy::kPrivate,
                                                &recon_untrained);
  const auto r1 = attacks::ReconstructionAttack(private_features, images.train, images.test, cfg,
                                                attacks::EncoderPrivacy::kPrivate, &recon_trained);
  json report = {{"private_untrained", ReconstructionJson(r0)},
                 {"private_trained", ReconstructionJson(r1)}};
  std::string text = "# private encoder, untrained decoder\n" + attacks::RenderReconstruction(r0) +
                     "\n# private encoder, trained decoder\n" +
                     attacks::RenderReconstruction(r1);
  if (reference) {
    LoadedModel ref = LoadModel(*reference, overrides);
    const auto r2 = attacks::ReconstructionAttack(FeaturesOf(ref.model, c), images.train,
                                                  images.test, cfg,
                                                  attacks::EncoderPrivacy::kNonPrivate,
                                                  &recon_reference);
    report["non_private_trained"] = ReconstructionJson(r2);
    text += "\n# non-private encoder, trained decoder\n" + attacks::RenderReconstruction(r2);
  }

  fs::create_directories(out_dir);
  const int columns = std::min(8, images.test.dim(0));
  std::vector<Tensor> tiles;
  const Shape sample = {images.test.dim(1), images.test.dim(2), images.test.dim(3)};
  auto add_row = [&](const Tensor& batch) {
    for (int i = 0; i < columns; ++i) tiles.push_back(batch.Slice(i, i + 1).Reshaped(sample));
  };
  add_row(images.test);
  if (reference) add_row(recon_reference);
  add_row(recon_untrained);
  add_row(recon_trained);
  data::WritePng(out_dir / "reconstruction_grid.png", data::ImageGrid(tiles, columns));
  report["grid_rows"] = reference ? json::array({"original", "non_private", "private_untrained",
                                                 "private_trained"})
                                  : json::array({"original", "private_untrained",
                                                 "private_trained"});
  WriteText(out_dir / "reconstruction.json", report.dump(2) + "\n");
  WriteText(out_dir / "reconstruction.txt", text);
  log << text;
  return report;
}

void WriteRttSummary(const fs::path& path, const std::vector<runtime::RttSummary>& rows) {
  auto out = OpenOut(path);
  out << "payload_bytes,count,mean_rtt_ms,p50_ms,p95_ms\n";
  for (const auto& r : rows)
    out << r.payload_bytes << ',' << r.count << ',' << r.mean_ms << ',' << r.p50_ms << ','
        << r.p95_ms << '\n';
}

runtime::SessionOutcome RunServe(const ExperimentConfig& c, const ServeOptions& options,
                                 std::ostream& log) {
  const bool probe = !options.probe_bytes.empty();
  // Everything that can fail on configuration happens before listening.
  std::optional<model::MultiTaskModel> model;
  data::Dataset train_data;
  runtime::SessionConfig session;
  runtime::ProducerOptions producer;
  if (!probe) {
    session = SessionFor(c);
    model.emplace(BuildModel(c));
    if (options.checkpoint) LoadParameters(ReadCheckpoint(*options.checkpoint), *model);
    train_data = LoadData(c).train;
    producer.optimizer = c.training.optimizer;
    if (c.dp && c.regime.kind != train::RegimeKind::kTaskPrivacyOnly) {
      ExperimentConfig plan = c;
      plan.regime.kind = train::RegimeKind::kInputObfuscationOnly;
      plan.regime.phase1_epochs = c.runtime.epochs;
      producer.dp = ResolveDp(plan, train_data.size());
    }
  }

  runtime::TcpListener listener(runtime::ParseEndpoint(c.runtime.listen));
  log << "listening on port " << listener.port() << std::endl;
  if (options.on_listening) options.on_listening(listener.port());
  runtime::Channel channel(listener.Accept(c.runtime.timeout_seconds), c.runtime.session_id);
  if (!c.runtime.dump.empty()) channel.SetDumpFile(c.runtime.dump);

  runtime::SessionOutcome outcome;
  const fs::path dir = c.output_dir;
  fs::create_directories(dir);
  if (probe) {
    try {
      outcome.rtt = runtime::RunRttProbe(channel, options.probe_bytes, options.probe_repetitions,
                                         c.runtime.timeout_seconds);
      outcome.batches = static_cast<long>(outcome.rtt.size());
    } catch (const Error& e) {
      outcome.status = runtime::SessionStatus::kAborted;
      outcome.error_kind = e.kind();
      outcome.error = e.what();
    }
    outcome.channel = channel.stats();
  } else {
    outcome = runtime::RunProducer(*model, train_data, session, producer, channel);
    Checkpoint ck;
    ck.metadata = {{"format", "mtsplit checkpoint"},
                   {"status", runtime::SessionStatusName(outcome.status)},
                   {"config", ConfigToJson(c)},
                   {"ledger", outcome.ledger ? json(outcome.ledger->Serialize()) : json(nullptr)},
                   {"history", json::array()}};
    StoreParameters(*model, ck);
    WriteCheckpoint(dir / kCheckpointName, ck);
  }
  WriteRtt(dir, outcome.rtt);
  const json summary = SessionJson(outcome);
  WriteText(dir / "session.json", summary.dump(2) + "\n");
  log << "session " << summary["status"].get<std::string>() << " after " << outcome.batches
      << " batches" << std::endl;
  for (const auto& row : runtime::MeasureRtt(outcome.rtt))
    log << "payload " << row.payload_bytes << " B: mean " << Fixed(row.mean_ms, 3) << " ms over "
        << row.count << std::endl;
  if (outcome.error_kind) log << "error: " << outcome.error << std::endl;
  return outcome;
}

runtime::SessionOutcome RunConsume(const ExperimentConfig& c, bool echo, std::ostream& log) {
  std::optional<model::MultiTaskModel> model;
  runtime::SessionConfig session;
  std::size_t task = 0;
  if (!echo) {
    session = SessionFor(c);
    task = SessionTask(c);
    model.emplace(BuildModel(c));
  }
  runtime::Channel channel(
      runtime::TcpStream::Connect(runtime::ParseEndpoint(c.runtime.connect),
                                  c.runtime.timeout_seconds),
      c.runtime.session_id);
  if (!c.runtime.dump.empty()) channel.SetDumpFile(c.runtime.dump);

  runtime::SessionOutcome outcome;
  if (echo) {
    try {
      outcome.batches = runtime::ServeEcho(channel, c.runtime.timeout_seconds);
    } catch (const Error& e) {
      outcome.status = runtime::SessionStatus::kAborted;
      outcome.error_kind = e.kind();
      outcome.error = e.what();
    }
    outcome.channel = channel.stats();
  } else {
    outcome = runtime::RunConsumer(model->branch(task).head, c.tasks[task], session,
                                   c.training.optimizer, channel);
  }
  const fs::path dir = c.output_dir;
  fs::create_directories(dir);
  const json summary = SessionJson(outcome);
  WriteText(dir / "session.json", summary.dump(2) + "\n");
  log << "session " << summary["status"].get<std::string>() << " after " << outcome.batches
      << " batches" << std::endl;
  if (outcome.error_kind) log << "error: " << outcome.error << std::endl;
  return outcome;
}

std::string AccountantEpsilon(double q, double sigma, long steps, double delta) {
  privacy::DPConfig dp;
  dp.noise_multiplier = sigma;
  dp.sample_rate = q;
  dp.target_delta = delta;
  dp.target_epsilon = std::numeric_limits<double>::infinity();
  privacy::ValidateDPConfig(dp);
  Require(steps >= 0, ErrorKind::kConfig, "steps must be >= 0");
  std::ostringstream s;
  s << std::setprecision(10) << privacy::ComputeEpsilon(q, sigma, steps, delta);
  return s.str();
}

std::string AccountantSigma(double q, double epsilon, long steps, double delta) {
  privacy::DPConfig dp;
  dp.sample_rate = q;
  dp.target_delta = delta;
  dp.target_epsilon = epsilon;
  privacy::ValidateDPConfig(dp);
  Require(steps > 0, ErrorKind::kConfig, "steps must be > 0");
  std::ostringstream s;
  s << std::setprecision(10) << privacy::CalibrateSigma(dp, steps);
  return s.str();
}

void RunGenData(const ExperimentConfig& c, const fs::path& out_dir, std::ostream& log) {
  Require(c.dataset.kind == DatasetKind::kSyntheticClassification, ErrorKind::kConfig,
          "dataset.kind: gen-data writes synthetic_classification scenes only");
  const DataSplits splits = LoadData(c);
  auto write = [&](const data::Dataset& ds, const fs::path& dir) {
    fs::create_directories(dir);
    auto csv = OpenOut(dir / "labels.csv");
    csv << "filename";
    for (const auto& id : ds.task_ids) csv << ',' << id;
    csv << '\n';
    const Shape sample = {ds.images.dim(1), ds.images.dim(2), ds.images.dim(3)};
    for (int i = 0; i < ds.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "img_%06d.png", i);
      data::WritePng(dir / name, ds.images.Slice(i, i + 1).Reshaped(sample));
      csv << name;
      for (const auto& t : ds.targets) csv << ',' << t.labels.values[static_cast<std::size_t>(i)];
      csv << '\n';
    }
    log << "wrote " << ds.size() << " images to " << dir.string() << '\n';
  };
  write(splits.train, out_dir / "train");
  if (splits.test.size() > 0) write(splits.test, out_dir / "test");
}

}  // namespace mtsplit::cli
