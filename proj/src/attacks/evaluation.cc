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

#include "mtsplit/attacks/evaluation.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mtsplit/error.h"
#include "mtsplit/nn/optimizer.h"
#include "mtsplit/objectives/metrics.h"
#include "mtsplit/objectives/similarity.h"

namespace mtsplit::attacks {
namespace {

// Per-pixel L2 normalisation of a (N, 3, H, W) prediction.
Tensor NormalizeNormals(const Tensor& p) {
  Tensor out = p;
  const int n = p.dim(0), h = p.dim(2), w = p.dim(3);
  for (int s = 0; s < n; ++s)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double norm = 0;
        for (int c = 0; c < 3; ++c) norm += double(p.at(s, c, i, j)) * p.at(s, c, i, j);
        norm = std::sqrt(norm);
        for (int c = 0; c < 3; ++c)
          out.at(s, c, i, j) = norm > 0 ? static_cast<float>(p.at(s, c, i, j) / norm)
                                        : (c == 2 ? 1.0f : 0.0f);
      }
  return out;
}

std::string Fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

std::string PrimaryMetric(const train::TaskSpec& task) {
  if (!task.metrics.empty()) return task.metrics.front();
  switch (task.kind) {
    case model::TaskKind::kClassification: return "accuracy";
    case model::TaskKind::kSegmentation: return "miou";
    case model::TaskKind::kDenseRegression: return "abs_err";
  }
  return "accuracy";
}

double ComputeMetric(const std::string& metric, const train::TaskSpec& task,
                     const Tensor& prediction, const objectives::TaskTarget& target) {
  using namespace objectives;
  if (metric == "accuracy") return Accuracy(ArgMax(prediction), target.labels);
  if (metric == "miou" || metric == "pixel_accuracy") {
    const auto s = SegmentationMetrics(ArgMax(prediction), target.labels, task.num_outputs);
    return metric == "miou" ? s.miou : s.pixel_accuracy;
  }
  if (metric == "abs_err" || metric == "rel_err") {
    const auto e = DepthLoss(prediction, target.values);
    if (e.empty) return std::nan("");
    return metric == "abs_err" ? e.mae : e.rel;
  }
  if (metric.rfind("normal_", 0) == 0) {
    const auto s = SurfaceNormalMetrics(NormalizeNormals(prediction), target.values);
    if (metric == "normal_mean") return s.mean_degrees;
    if (metric == "normal_median") return s.median_degrees;
    if (metric == "normal_11_25") return s.within_11_25;
    if (metric == "normal_22_5") return s.within_22_5;
    if (metric == "normal_30") return s.within_30;
  }
  Fail(ErrorKind::kConfig, "unknown metric '" + metric + "' for task '" + task.task_id + "'");
}

Tensor PredictAll(model::MultiTaskModel& model, std::size_t module_task,
                  std::size_t head_task, const Tensor& images, int batch_size) {
  const int n = images.dim(0);
  Tensor out;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(n, start + batch_size);
    const Tensor z = model.Encode(images.Slice(start, end));
    const Tensor f = model.Transform(module_task, z);
    const Tensor y = model.branch(head_task).head.Forward(f);
    if (out.empty()) {
      Shape s = y.shape();
      s[0] = n;
      out = Tensor(s);
    }
    std::copy(y.values().begin(), y.values().end(),
              out.data() + static_cast<std::size_t>(start) * y.SampleSize());
  }
  return out;
}

double EvaluateTask(model::MultiTaskModel& model, const std::vector<train::TaskSpec>& tasks,
                    std::size_t task, const data::Dataset& data) {
  const Tensor p = PredictAll(model, task, task, data.images);
  return ComputeMetric(PrimaryMetric(tasks[task]), tasks[task], p,
                       data.Target(tasks[task].task_id));
}

InterchangeReport EvaluateInterchange(model::MultiTaskModel& model,
                                      const std::vector<train::TaskSpec>& tasks,
                                      const data::Dataset& data) {
  InterchangeReport r;
  const std::size_t t = tasks.size();
  for (const auto& task : tasks) {
    r.task_ids.push_back(task.task_id);
    r.metrics.push_back(PrimaryMetric(task));
  }
  r.values.assign(t, std::vector<double>(t, 0.0));
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      const Tensor p = PredictAll(model, i, j, data.images);
      r.values[i][j] = ComputeMetric(r.metrics[j], tasks[j], p, data.Target(tasks[j].task_id));
    }
  return r;
}

std::string RenderInterchange(const InterchangeReport& r) {
  std::ostringstream os;
  for (std::size_t i = 0; i < r.task_ids.size(); ++i)
    for (std::size_t j = 0; j < r.task_ids.size(); ++j)
      os << "cell module=" << r.task_ids[i] << " classifier=" << r.task_ids[j]
         << " metric=" << r.metrics[j] << " value=" << Fixed(r.values[i][j], 6) << "\n";
  std::size_t width = 21;
  for (std::size_t j = 0; j < r.task_ids.size(); ++j)
    width = std::max(width, r.task_ids[j].size() + r.metrics[j].size() + 5);
  os << "\n" << std::left << std::setw(static_cast<int>(width)) << "module \\ classifier";
  for (std::size_t j = 0; j < r.task_ids.size(); ++j)
    os << std::setw(static_cast<int>(width)) << (r.task_ids[j] + " (" + r.metrics[j] + ")");
  os << "\n";
  for (std::size_t i = 0; i < r.task_ids.size(); ++i) {
    os << std::setw(static_cast<int>(width)) << r.task_ids[i];
    for (std::size_t j = 0; j < r.task_ids.size(); ++j)
      os << std::setw(static_cast<int>(width)) << Fixed(r.values[i][j]);
    os << "\n";
  }
  return os.str();
}

const char* EncoderPrivacyName(EncoderPrivacy p) {
  return p == EncoderPrivacy::kPrivate ? "private" : "non_private";
}

ReconstructionReport ReconstructionAttack(const FeatureFn& features,
                                          const Tensor& attack_train,
                                          const Tensor& attack_test,
                                          const AttackConfig& config,
                                          EncoderPrivacy privacy,
                                          Tensor* reconstructions) {
  Require(config.epochs >= 0 && config.batch_size > 0 && config.learning_rate > 0,
          ErrorKind::kConfig, "attack needs epochs >= 0, batch_size > 0, learning_rate > 0");
  Require(attack_train.ndim() == 4 && attack_test.ndim() == 4 && attack_test.dim(0) > 0,
          ErrorKind::kConfig, "attack needs (N, C, H, W) train and non-empty test images");
  const Tensor train_features = features(attack_train);
  const Tensor test_features = features(attack_test);
  Shape feature_shape(train_features.shape().begin() + 1, train_features.shape().end());
  Shape image_shape(attack_train.shape().begin() + 1, attack_train.shape().end());

  std::mt19937_64 rng(config.seed);
  nn::Sequential decoder = model::BuildDecoder(feature_shape, image_shape, config.decoder, rng);
  nn::OptimizerConfig oc;
  oc.learning_rate = config.learning_rate;
  nn::Optimizer optimizer(decoder.Parameters(), oc);
  objectives::SimilarityMeasure ssim;

  ReconstructionReport report;
  report.attack_epochs = config.epochs;
  report.encoder_privacy = privacy;
  const int n = attack_train.dim(0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& rows : data::ShuffledBatches(n, config.batch_size, rng)) {
      decoder.ZeroGrad();
      const Tensor x = attack_train.Gather(rows);
      const Tensor recon = decoder.Forward(train_features.Gather(rows));
      Tensor g_l1, g_ssim, unused;
      const double l1 = objectives::L1Loss(recon, x, &g_l1);
      const double s = objectives::Similarity(recon, x, ssim, &g_ssim, &unused);
      g_ssim *= -1.0f;
      g_l1 += g_ssim;
      decoder.Backward(g_l1);
      optimizer.Step();
      total += (l1 + 1.0 - s) * static_cast<double>(rows.size());
    }
    report.train_loss.push_back(total / n);
  }

  Tensor recon_all(attack_test.shape());
  const int m = attack_test.dim(0);
  for (int start = 0; start < m; start += config.batch_size) {
    const int end = std::min(m, start + config.batch_size);
    const Tensor r = decoder.Forward(test_features.Slice(start, end));
    std::copy(r.values().begin(), r.values().end(),
              recon_all.data() + static_cast<std::size_t>(start) * r.SampleSize());
  }
  for (int i = 0; i < m; ++i) {
    report.scores.push_back(objectives::Similarity(recon_all.Slice(i, i + 1),
                                                   attack_test.Slice(i, i + 1), ssim));
    report.mean_score += report.scores.back() / m;
  }
  if (reconstructions) *reconstructions = std::move(recon_all);
  return report;
}

std::string RenderReconstruction(const ReconstructionReport& r) {
  std::ostringstream os;
  os << "encoder=" << EncoderPrivacyName(r.encoder_privacy)
     << " attack_epochs=" << r.attack_epochs << " images=" << r.scores.size()
     << " mean_ssim=" << Fixed(r.mean_score, 6) << "\n";
  for (std::size_t i = 0; i < r.scores.size(); ++i)
    os << "image " << i << " ssim=" << Fixed(r.scores[i], 6) << "\n";
  return os.str();
}

void ExportEmbeddings(model::MultiTaskModel& model, const Tensor& images,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  Require(out.good(), ErrorKind::kIo, "cannot write embeddings to " + path.string());
  const Tensor z = model.Encode(images);
  for (std::size_t t = 0; t < model.num_tasks(); ++t) {
    const Tensor f = model.Transform(t, z);
    const std::size_t stride = f.SampleSize();
    if (t == 0) {
      out << "sample_id,task_id";
      for (std::size_t k = 0; k < stride; ++k) out << ",v" << k;
      out << "\n";
    }
    for (int s = 0; s < f.dim(0); ++s) {
      out << s << "," << model.branch(t).spec.task_id;
      for (std::size_t k = 0; k < stride; ++k) out << "," << f[s * stride + k];
      out << "\n";
    }
  }
  Require(out.good(), ErrorKind::kIo, "failed writing embeddings to " + path.string());
}

double MeanCrossTaskCosine(model::MultiTaskModel& model, const Tensor& images) {
  const std::size_t t = model.num_tasks();
  if (t < 2) return 0.0;
  const Tensor z = model.Encode(images);
  std::vector<Tensor> f;
  for (std::size_t i = 0; i < t; ++i) f.push_back(model.Transform(i, z));
  const std::size_t stride = f[0].SampleSize();
  double total = 0.0;
  long count = 0;
  for (int s = 0; s < images.dim(0); ++s)
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < t; ++j) {
        if (i == j) continue;
        double dot = 0, ni = 0, nj = 0;
        for (std::size_t k = 0; k < stride; ++k) {
          const double a = f[i][s * stride + k], b = f[j][s * stride + k];
          dot += a * b;
          ni += a * a;
          nj += b * b;
        }
        total += dot / std::max(1e-30, std::sqrt(ni * nj));
        ++count;
      }
  return total / count;
}

}  // namespace mtsplit::attacks
