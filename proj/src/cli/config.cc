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

#include "mtsplit/cli/config.h"

#include <fstream>
#include <limits>
#include <set>
#include <type_traits>

#include "mtsplit/error.h"
#include "mtsplit/privacy/accountant.h"

namespace mtsplit::cli {
namespace {

using nlohmann::json;

std::string Join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Runs fn, prefixing configuration errors with the field path.
template <typename F>
auto At(const std::string& path, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kConfig) throw;
    const std::string what = e.what();
    if (what.rfind(path, 0) == 0 || what.rfind("unknown field", 0) == 0) throw;
    Fail(ErrorKind::kConfig, path + ": " + what);
  }
}

// Typed access to one JSON object that remembers which keys were read, so
// leftovers can be reported as unknown fields.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    Require(j_.is_object(), ErrorKind::kConfig,
            (path_.empty() ? std::string("config") : path_) + " must be an object");
  }

  bool Has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  std::string PathOf(const std::string& key) const { return Join(path_, key); }

  template <typename T>
  T Get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!Has(key)) return fallback;
    return Convert<T>(j_.at(key), PathOf(key));
  }

  // Missing keys are reported by Finish, after unknown ones, so a misspelt
  // field is named as such rather than as a missing one.
  template <typename T>
  T Need(const std::string& key) {
    seen_.insert(key);
    if (!Has(key)) {
      missing_.push_back(key);
      return T{};
    }
    return Convert<T>(j_.at(key), PathOf(key));
  }

  // Required enumerated field: the text is handed to parse.
  template <typename F>
  auto NeedParsed(const std::string& key, F&& parse) -> decltype(parse(std::string())) {
    seen_.insert(key);
    if (!Has(key)) {
      missing_.push_back(key);
      return {};
    }
    const auto text = Convert<std::string>(j_.at(key), PathOf(key));
    return At(PathOf(key), [&] { return parse(text); });
  }

  template <typename T>
  std::optional<T> Maybe(const std::string& key) {
    seen_.insert(key);
    if (!Has(key)) return std::nullopt;
    return Convert<T>(j_.at(key), PathOf(key));
  }

  const json* Sub(const std::string& key) {
    seen_.insert(key);
    return Has(key) ? &j_.at(key) : nullptr;
  }

  void Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      Require(seen_.count(it.key()) > 0, ErrorKind::kConfig,
              "unknown field '" + PathOf(it.key()) + "'");
    if (!missing_.empty())
      Fail(ErrorKind::kConfig, PathOf(missing_.front()) + ": required field is missing");
  }

  template <typename T>
  static T Convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      Require(v.is_boolean(), ErrorKind::kConfig, path + ": expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      Require(v.is_number_integer(), ErrorKind::kConfig, path + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        Require(v.is_number_unsigned() || v.get<long long>() >= 0, ErrorKind::kConfig,
                path + ": expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      Require(v.is_number(), ErrorKind::kConfig, path + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      Require(v.is_string(), ErrorKind::kConfig, path + ": expected a string");
    } else {
      Require(v.is_array(), ErrorKind::kConfig, path + ": expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(Convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
      return out;
    }
    return v.get<T>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
  std::vector<std::string> missing_;
};

const char* DatasetKindName(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kSyntheticClassification: return "synthetic_classification";
    case DatasetKind::kSyntheticDense: return "synthetic_dense";
    case DatasetKind::kImageFolder: return "image_folder";
  }
  return "?";
}

DatasetKind ParseDatasetKind(const std::string& name) {
  if (name == "synthetic_classification") return DatasetKind::kSyntheticClassification;
  if (name == "synthetic_dense") return DatasetKind::kSyntheticDense;
  if (name == "image_folder") return DatasetKind::kImageFolder;
  Fail(ErrorKind::kConfig, "unknown dataset kind '" + name +
                               "' (expected synthetic_classification, synthetic_dense or "
                               "image_folder)");
}

objectives::LossKind DefaultLoss(model::TaskKind kind) {
  return kind == model::TaskKind::kDenseRegression ? objectives::LossKind::kMaskedL1
                                                   : objectives::LossKind::kCrossEntropy;
}

void ParseDataset(const json& j, std::uint64_t seed, DatasetConfig& d) {
  Fields f(j, "dataset");
  d.kind = f.NeedParsed("kind", ParseDatasetKind);
  auto& s = d.scene;
  s.num_samples = f.Get("num_samples", s.num_samples);
  s.height = f.Get("height", s.height);
  s.width = f.Get("width", s.width);
  s.num_shapes = f.Get("num_shapes", s.num_shapes);
  s.shape_classes = f.Get("shape_classes", s.shape_classes);
  s.color_classes = f.Get("color_classes", s.color_classes);
  s.noise_level = f.Get("noise_level", s.noise_level);
  s.size_color_correlation = f.Get("size_color_correlation", s.size_color_correlation);
  s.seed = f.Get<std::uint64_t>("seed", seed);
  d.test_samples = f.Get("test_samples", d.test_samples);
  d.folder = f.Get<std::string>("folder", "");
  d.labels_csv = f.Get<std::string>("labels_csv", "");
  d.test_folder = f.Get<std::string>("test_folder", "");
  d.test_labels_csv = f.Get<std::string>("test_labels_csv", "");
  auto triple = [&](const std::string& key, std::array<double, 3>& out) {
    const auto v = f.Get<std::vector<double>>(key, {out.begin(), out.end()});
    Require(v.size() == 3, ErrorKind::kConfig, f.PathOf(key) + ": expected 3 values");
    std::copy(v.begin(), v.end(), out.begin());
  };
  triple("mean", d.image.mean);
  triple("std", d.image.stddev);
  f.Finish();
  d.image.height = s.height;
  d.image.width = s.width;
  Require(d.test_samples >= 0, ErrorKind::kConfig, "dataset.test_samples must be >= 0");
  if (d.kind == DatasetKind::kImageFolder) {
    Require(!d.folder.empty() && !d.labels_csv.empty(), ErrorKind::kConfig,
            "dataset.folder and dataset.labels_csv are required for image_folder");
    for (double sd : d.image.stddev)
      Require(sd > 0, ErrorKind::kConfig, "dataset.std values must be > 0");
  } else {
    At("dataset", [&] { data::ValidateSceneConfig(s); });
  }
}

void ParseBackbone(const json& j, ExperimentConfig& c) {
  Fields f(j, "backbone");
  c.split_index = f.Get("split_index", c.split_index);
  c.dense_head_width = f.Get("dense_head_width", c.dense_head_width);
  if (const json* blocks = f.Sub("blocks")) {
    Require(blocks->is_array(), ErrorKind::kConfig, "backbone.blocks: expected an array");
    c.blocks.clear();
    for (std::size_t i = 0; i < blocks->size(); ++i) {
      const std::string path = "backbone.blocks[" + std::to_string(i) + "]";
      Fields b((*blocks)[i], path);
      model::BlockDescriptor d;
      d.kind = At(path + ".kind", [&] { return model::ParseBlockKind(b.Get<std::string>("kind", "conv")); });
      d.channels = b.Need<int>("channels");
      d.stride = b.Get("stride", 1);
      b.Finish();
      c.blocks.push_back(d);
    }
  }
  f.Finish();
  Require(c.dense_head_width > 0, ErrorKind::kConfig, "backbone.dense_head_width must be > 0");
}

train::TaskSpec ParseTask(const json& j, const std::string& path) {
  Fields f(j, path);
  train::TaskSpec t;
  t.task_id = f.Need<std::string>("task_id");
  t.kind = f.NeedParsed("kind", model::ParseTaskKind);
  t.num_outputs = f.Need<int>("num_outputs");
  const auto loss = f.Maybe<std::string>("loss");
  t.loss = loss ? At(path + ".loss", [&] { return objectives::ParseLossKind(*loss); })
                : DefaultLoss(t.kind);
  t.is_private = f.Get("is_private", false);
  t.metrics = f.Get<std::vector<std::string>>("metrics", {});
  f.Finish();
  return t;
}

DpBlock ParseDp(const json& j) {
  Fields f(j, "dp");
  DpBlock d;
  d.clip_threshold = f.Need<double>("clip_threshold");
  d.noise_multiplier = f.Maybe<double>("noise_multiplier");
  d.target_epsilon = f.Maybe<double>("target_epsilon");
  d.target_delta = f.Need<double>("target_delta");
  f.Finish();
  Require(d.noise_multiplier || d.target_epsilon, ErrorKind::kConfig,
          "dp: set dp.noise_multiplier, dp.target_epsilon or both");
  Require(d.clip_threshold > 0, ErrorKind::kConfig, "dp.clip_threshold must be > 0");
  Require(d.target_delta > 0 && d.target_delta < 1, ErrorKind::kConfig,
          "dp.target_delta must lie in (0, 1)");
  if (d.noise_multiplier)
    Require(*d.noise_multiplier >= 0, ErrorKind::kConfig, "dp.noise_multiplier must be >= 0");
  if (d.target_epsilon)
    Require(*d.target_epsilon > 0, ErrorKind::kConfig, "dp.target_epsilon must be > 0");
  return d;
}

void ParseTraining(const json& j, TrainingBlock& t) {
  Fields f(j, "training");
  t.batch_size = f.Get("batch_size", t.batch_size);
  auto& o = t.optimizer;
  o.kind = f.Get("optimizer", o.kind);
  o.learning_rate = f.Get("learning_rate", o.learning_rate);
  o.weight_decay = f.Get("weight_decay", o.weight_decay);
  o.beta1 = f.Get("beta1", o.beta1);
  o.beta2 = f.Get("beta2", o.beta2);
  o.eps = f.Get("eps", o.eps);
  o.momentum = f.Get("momentum", o.momentum);
  o.step_size = f.Get("step_size", o.step_size);
  o.gamma = f.Get("gamma", o.gamma);
  t.augment_flip = f.Get("augment_flip", t.augment_flip);
  t.select_best = f.Get("select_best", t.select_best);
  auto& s = t.similarity;
  s.kind = At("training.similarity", [&] {
    return objectives::ParseSimilarityKind(
        f.Get<std::string>("similarity", objectives::SimilarityKindName(s.kind)));
  });
  s.window_size = f.Get("similarity_window", s.window_size);
  s.gaussian_sigma = f.Get("similarity_sigma", s.gaussian_sigma);
  s.scales = f.Get("similarity_scales", s.scales);
  f.Finish();
  Require(t.batch_size > 0, ErrorKind::kConfig, "training.batch_size must be > 0");
  Require(o.kind == "adamw" || o.kind == "sgd", ErrorKind::kConfig,
          "training.optimizer: expected adamw or sgd, got '" + o.kind + "'");
  Require(o.learning_rate > 0, ErrorKind::kConfig, "training.learning_rate must be > 0");
  At("training", [&] { objectives::ValidateSimilarityMeasure(s); });
}

void ParseAttack(const json& j, AttackBlock& a) {
  Fields f(j, "attack");
  a.attack.epochs = f.Get("epochs", a.attack.epochs);
  a.attack.learning_rate = f.Get("learning_rate", a.attack.learning_rate);
  a.attack.batch_size = f.Get("batch_size", a.attack.batch_size);
  a.attack.decoder.width = f.Get("decoder_width", a.attack.decoder.width);
  a.train_samples = f.Get("train_samples", a.train_samples);
  a.test_samples = f.Get("test_samples", a.test_samples);
  f.Finish();
  Require(a.attack.epochs >= 0 && a.attack.batch_size > 0 && a.attack.learning_rate > 0,
          ErrorKind::kConfig, "attack: epochs >= 0, batch_size > 0 and learning_rate > 0");
  Require(a.train_samples > 0 && a.test_samples > 0, ErrorKind::kConfig,
          "attack.train_samples and attack.test_samples must be > 0");
}

void ParseRuntime(const json& j, RuntimeBlock& r) {
  Fields f(j, "runtime");
  r.listen = f.Get("listen", r.listen);
  r.connect = f.Get("connect", r.connect);
  r.key = f.Get("key", r.key);
  r.session_id = f.Get("session_id", r.session_id);
  r.task_id = f.Get("task_id", r.task_id);
  r.wire_dtype = f.Get("wire_dtype", r.wire_dtype);
  r.timeout_seconds = f.Get("timeout_seconds", r.timeout_seconds);
  r.max_batches = f.Get("max_batches", r.max_batches);
  r.epochs = f.Get("epochs", r.epochs);
  r.dump = f.Get("dump", r.dump);
  f.Finish();
  Require(r.wire_dtype == "f32" || r.wire_dtype == "f16", ErrorKind::kConfig,
          "runtime.wire_dtype: expected f32 or f16, got '" + r.wire_dtype + "'");
  Require(r.timeout_seconds > 0, ErrorKind::kConfig, "runtime.timeout_seconds must be > 0");
  Require(r.epochs >= 0, ErrorKind::kConfig, "runtime.epochs must be >= 0");
}

}  // namespace

ExperimentConfig ParseConfig(const json& document) {
  Fields top(document, "");
  ExperimentConfig c;
  c.seed = top.Get<std::uint64_t>("seed", 0);

  const json* dataset = top.Sub("dataset");
  Require(dataset != nullptr, ErrorKind::kConfig, "dataset: required block is missing");
  ParseDataset(*dataset, c.seed, c.dataset);
  if (const json* b = top.Sub("backbone")) ParseBackbone(*b, c);

  const json* tasks = top.Sub("tasks");
  Require(tasks != nullptr && tasks->is_array() && !tasks->empty(), ErrorKind::kConfig,
          "tasks: expected a non-empty array");
  for (std::size_t i = 0; i < tasks->size(); ++i)
    c.tasks.push_back(ParseTask((*tasks)[i], "tasks[" + std::to_string(i) + "]"));

  if (const json* m = top.Sub("metamorph")) {
    Fields f(*m, "metamorph");
    c.metamorph.k = f.Get("k", c.metamorph.k);
    c.metamorph.reduction_ratio = f.Get("reduction_ratio", c.metamorph.reduction_ratio);
    c.metamorph.crossing = At("metamorph.crossing", [&] {
      return model::ParseCrossing(f.Get<std::string>("crossing", "cross"));
    });
    f.Finish();
  }
  if (const json* dp = top.Sub("dp")) c.dp = ParseDp(*dp);

  const json* weights = top.Sub("weights");
  Require(weights != nullptr, ErrorKind::kConfig,
          "weights: required block is missing (weights.omega must be explicit)");
  {
    Fields f(*weights, "weights");
    c.weights.omega = f.Need<double>("omega");
    c.weights.per_task = f.Get<std::vector<double>>("per_task", {});
    f.Finish();
  }

  const json* regime = top.Sub("regime");
  Require(regime != nullptr, ErrorKind::kConfig, "regime: required block is missing");
  {
    Fields f(*regime, "regime");
    c.regime.kind = f.NeedParsed("kind", train::ParseRegimeKind);
    c.regime.phase1_epochs = f.Get("phase1_epochs", c.regime.phase1_epochs);
    c.regime.phase2_epochs = f.Get("phase2_epochs", c.regime.phase2_epochs);
    c.regime.freeze_encoder_phase2 = f.Get("freeze_encoder_phase2", c.regime.freeze_encoder_phase2);
    f.Finish();
    c.regime.seed = c.seed;
    Require(c.regime.phase1_epochs >= 0 && c.regime.phase2_epochs >= 0, ErrorKind::kConfig,
            "regime: epoch counts must be >= 0");
  }
  if (const json* t = top.Sub("training")) ParseTraining(*t, c.training);
  if (const json* a = top.Sub("attack")) ParseAttack(*a, c.attack);
  c.attack.attack.seed = c.seed;
  if (const json* r = top.Sub("runtime")) ParseRuntime(*r, c.runtime);
  if (const json* o = top.Sub("output")) {
    Fields f(*o, "output");
    c.output_dir = f.Get("dir", c.output_dir);
    f.Finish();
  }
  top.Finish();

  // Cross-field checks.
  At("tasks", [&] { train::ValidateTasks(c.tasks, c.regime.kind); });
  const bool needs_dp = c.regime.kind != train::RegimeKind::kTaskPrivacyOnly;
  Require(!needs_dp || c.dp.has_value(), ErrorKind::kConfig,
          std::string("dp: required for regime ") + train::RegimeKindName(c.regime.kind));
  At("weights", [&] {
    objectives::ValidateLossWeights(
        c.weights, c.weights.per_task.empty() ? c.tasks.size() : c.weights.per_task.size());
  });
  Require(c.weights.per_task.empty() || c.weights.per_task.size() == c.tasks.size(),
          ErrorKind::kConfig, "weights.per_task needs one entry per task");
  const auto arch = Architecture(c);
  At("backbone", [&] { model::ValidateBackboneSpec(arch.backbone); });
  const Shape features = model::ShapeAfterBlocks(arch.backbone, arch.backbone.split_index);
  At("metamorph", [&] { model::ValidateMetamorphConfig(c.metamorph, features[0]); });
  if (!c.runtime.task_id.empty()) {
    bool found = false;
    for (const auto& t : c.tasks) found |= t.task_id == c.runtime.task_id;
    Require(found, ErrorKind::kConfig,
            "runtime.task_id: '" + c.runtime.task_id + "' is not a configured task");
  }
  return c;
}

json ConfigToJson(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  const auto& d = c.dataset;
  j["dataset"] = {{"kind", DatasetKindName(d.kind)},
                  {"num_samples", d.scene.num_samples},
                  {"test_samples", d.test_samples},
                  {"height", d.scene.height},
                  {"width", d.scene.width},
                  {"num_shapes", d.scene.num_shapes},
                  {"shape_classes", d.scene.shape_classes},
                  {"color_classes", d.scene.color_classes},
                  {"noise_level", d.scene.noise_level},
                  {"size_color_correlation", d.scene.size_color_correlation},
                  {"seed", d.scene.seed},
                  {"folder", d.folder},
                  {"labels_csv", d.labels_csv},
                  {"test_folder", d.test_folder},
                  {"test_labels_csv", d.test_labels_csv},
                  {"mean", d.image.mean},
                  {"std", d.image.stddev}};
  json blocks = json::array();
  for (const auto& b : c.blocks)
    blocks.push_back({{"kind", model::BlockKindName(b.kind)},
                      {"channels", b.channels},
                      {"stride", b.stride}});
  j["backbone"] = {{"split_index", c.split_index},
                   {"dense_head_width", c.dense_head_width},
                   {"blocks", blocks}};
  json tasks = json::array();
  for (const auto& t : c.tasks)
    tasks.push_back({{"task_id", t.task_id},
                     {"kind", model::TaskKindName(t.kind)},
                     {"num_outputs", t.num_outputs},
                     {"loss", objectives::LossKindName(t.loss)},
                     {"is_private", t.is_private},
                     {"metrics", t.metrics}});
  j["tasks"] = tasks;
  j["metamorph"] = {{"k", c.metamorph.k},
                    {"reduction_ratio", c.metamorph.reduction_ratio},
                    {"crossing", model::CrossingName(c.metamorph.crossing)}};
  if (c.dp) {
    json dp = {{"clip_threshold", c.dp->clip_threshold}, {"target_delta", c.dp->target_delta}};
    if (c.dp->noise_multiplier) dp["noise_multiplier"] = *c.dp->noise_multiplier;
    if (c.dp->target_epsilon) dp["target_epsilon"] = *c.dp->target_epsilon;
    j["dp"] = dp;
  }
  j["weights"] = {{"omega", c.weights.omega}, {"per_task", c.weights.per_task}};
  j["regime"] = {{"kind", train::RegimeKindName(c.regime.kind)},
                 {"phase1_epochs", c.regime.phase1_epochs},
                 {"phase2_epochs", c.regime.phase2_epochs},
                 {"freeze_encoder_phase2", c.regime.freeze_encoder_phase2}};
  const auto& t = c.training;
  j["training"] = {{"batch_size", t.batch_size},
                   {"optimizer", t.optimizer.kind},
                   {"learning_rate", t.optimizer.learning_rate},
                   {"weight_decay", t.optimizer.weight_decay},
                   {"beta1", t.optimizer.beta1},
                   {"beta2", t.optimizer.beta2},
                   {"eps", t.optimizer.eps},
                   {"momentum", t.optimizer.momentum},
                   {"step_size", t.optimizer.step_size},
                   {"gamma", t.optimizer.gamma},
                   {"augment_flip", t.augment_flip},
                   {"select_best", t.select_best},
                   {"similarity", objectives::SimilarityKindName(t.similarity.kind)},
                   {"similarity_window", t.similarity.window_size},
                   {"similarity_sigma", t.similarity.gaussian_sigma},
                   {"similarity_scales", t.similarity.scales}};
  j["attack"] = {{"epochs", c.attack.attack.epochs},
                 {"learning_rate", c.attack.attack.learning_rate},
                 {"batch_size", c.attack.attack.batch_size},
                 {"decoder_width", c.attack.attack.decoder.width},
                 {"train_samples", c.attack.train_samples},
                 {"test_samples", c.attack.test_samples}};
  const auto& r = c.runtime;
  j["runtime"] = {{"listen", r.listen},         {"connect", r.connect},
                  {"key", r.key},               {"session_id", r.session_id},
                  {"task_id", r.task_id},       {"wire_dtype", r.wire_dtype},
                  {"timeout_seconds", r.timeout_seconds},
                  {"max_batches", r.max_batches},
                  {"epochs", r.epochs},         {"dump", r.dump}};
  j["output"] = {{"dir", c.output_dir}};
  return j;
}

void ApplyOverride(json& document, const std::string& assignment) {
  const auto eq = assignment.find('=');
  Require(eq != std::string::npos && eq > 0, ErrorKind::kConfig,
          "override '" + assignment + "' is not path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &document;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos
                                                                       : dot - start);
    Require(!key.empty(), ErrorKind::kConfig, "override path '" + path + "' has an empty segment");
    json* next = nullptr;
    if (node->is_array()) {
      Require(key.find_first_not_of("0123456789") == std::string::npos, ErrorKind::kConfig,
              "override '" + path + "': '" + key + "' must index an array");
      const std::size_t i = std::stoul(key);
      Require(i < node->size(), ErrorKind::kConfig,
              "override '" + path + "': index " + key + " out of range");
      next = &(*node)[i];
    } else {
      if (node->is_null()) *node = json::object();
      Require(node->is_object(), ErrorKind::kConfig,
              "override '" + path + "': '" + key + "' is not inside an object");
      next = &(*node)[key];
    }
    if (dot == std::string::npos) {
      *next = value;
      return;
    }
    node = next;
    start = dot + 1;
  }
}

json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  Require(in.good(), ErrorKind::kConfig, "cannot read config " + path.string());
  json j = json::parse(in, nullptr, false);
  Require(!j.is_discarded(), ErrorKind::kConfig, path.string() + ": not valid JSON");
  return j;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path,
                            const std::vector<std::string>& overrides) {
  json j = ReadJsonFile(path);
  for (const auto& o : overrides) ApplyOverride(j, o);
  return ParseConfig(j);
}

model::ArchitectureConfig Architecture(const ExperimentConfig& c) {
  model::ArchitectureConfig a;
  a.backbone.blocks = c.blocks;
  a.backbone.split_index = c.split_index;
  a.backbone.input_shape = {3, c.dataset.scene.height, c.dataset.scene.width};
  a.metamorph = c.metamorph;
  a.dense_head_width = c.dense_head_width;
  return a;
}

train::TrainerOptions TrainerOptionsFor(const ExperimentConfig& c) {
  train::TrainerOptions o;
  o.batch_size = c.training.batch_size;
  o.optimizer = c.training.optimizer;
  o.weights = c.weights;
  o.similarity = c.training.similarity;
  o.augment_flip = c.training.augment_flip;
  o.select_best = c.training.select_best;
  return o;
}

long PlannedDpSteps(const ExperimentConfig& c, int dataset_size) {
  if (c.regime.kind == train::RegimeKind::kTaskPrivacyOnly) return 0;
  return c.regime.phase1_epochs * train::StepsPerEpoch(dataset_size, c.training.batch_size);
}

privacy::DPConfig ResolveDp(const ExperimentConfig& c, int dataset_size) {
  Require(c.dp.has_value(), ErrorKind::kConfig, "dp: block is missing");
  privacy::DPConfig dp;
  dp.clip_threshold = c.dp->clip_threshold;
  dp.target_delta = c.dp->target_delta;
  dp.target_epsilon = c.dp->target_epsilon.value_or(std::numeric_limits<double>::infinity());
  dp.noise_multiplier = c.dp->noise_multiplier.value_or(1.0);
  dp = train::AccountingConfig(dp, std::max(1, dataset_size), c.training.batch_size);
  if (!c.dp->noise_multiplier)
    dp.noise_multiplier =
        privacy::CalibrateSigma(dp, std::max(1L, PlannedDpSteps(c, dataset_size)));
  return dp;
}

DataSplits LoadData(const ExperimentConfig& c) {
  DataSplits s;
  const auto& d = c.dataset;
  switch (d.kind) {
    case DatasetKind::kSyntheticClassification:
    case DatasetKind::kSyntheticDense: {
      auto gen = d.kind == DatasetKind::kSyntheticDense ? data::GenerateDensePair
                                                        : data::GenerateClassificationPair;
      s.train = gen(d.scene);
      data::SyntheticSceneConfig test = d.scene;
      test.num_samples = d.test_samples;
      test.seed = d.scene.seed + 1;
      if (d.test_samples > 0) s.test = gen(test);
      break;
    }
    case DatasetKind::kImageFolder:
      s.train = data::LoadImageFolder(d.folder, d.labels_csv, d.image);
      s.test = d.test_folder.empty()
                   ? s.train
                   : data::LoadImageFolder(d.test_folder,
                                           d.test_labels_csv.empty() ? d.labels_csv
                                                                     : d.test_labels_csv,
                                           d.image);
      break;
  }
  return s;
}

}  // namespace mtsplit::cli
