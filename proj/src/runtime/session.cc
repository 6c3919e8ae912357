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

#include "mtsplit/runtime/session.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mtsplit/privacy/dp.h"
#include "mtsplit/runtime/crypto.h"

namespace mtsplit::runtime {
namespace {

using nlohmann::json;

std::int64_t NowNs() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

SplitMessage Message(MsgType type, std::uint64_t batch_index) {
  SplitMessage m;
  m.type = type;
  m.batch_index = batch_index;
  return m;
}

SplitMessage JsonMessage(MsgType type, std::uint64_t batch_index, const json& body) {
  SplitMessage m = Message(type, batch_index);
  m.tensors.push_back(FeatureTensor::FromString(body.dump()));
  return m;
}

json JsonBody(const SplitMessage& m, std::size_t tensor = 0) {
  Require(m.tensors.size() > tensor && m.tensors[tensor].dtype == WireDType::kU8,
          ErrorKind::kProtocol, std::string(MsgTypeName(m.type)) + " without a JSON body");
  json body = json::parse(m.tensors[tensor].ToString(), nullptr, false);
  Require(body.is_object(), ErrorKind::kProtocol,
          std::string(MsgTypeName(m.type)) + " body is not a JSON object");
  return body;
}

FeatureTensor TagTensor(const std::array<std::uint8_t, 32>& tag) {
  return FeatureTensor::FromBytes(tag);
}

void CheckTag(const SplitMessage& hello, const std::array<std::uint8_t, 32>& expected) {
  Require(hello.tensors.size() >= 2 && hello.tensors[1].data.size() == expected.size() &&
              std::equal(expected.begin(), expected.end(), hello.tensors[1].data.begin()),
          ErrorKind::kSession, "key confirmation failed: the peers hold different keys");
}

objectives::TaskTarget ConcatTargets(const std::vector<const objectives::TaskTarget*>& parts) {
  objectives::TaskTarget out;
  if (parts.empty()) return out;
  const bool labels = parts[0]->values.empty();
  if (labels) {
    Shape shape = parts[0]->labels.shape;
    shape[0] = 0;
    std::vector<std::int32_t> values;
    for (const auto* p : parts) {
      shape[0] += p->labels.shape[0];
      values.insert(values.end(), p->labels.values.begin(), p->labels.values.end());
    }
    out.labels = LabelTensor(shape, std::move(values));
  } else {
    Shape shape = parts[0]->values.shape();
    shape[0] = 0;
    std::vector<float> values;
    for (const auto* p : parts) {
      shape[0] += p->values.dim(0);
      values.insert(values.end(), p->values.storage().begin(), p->values.storage().end());
    }
    out.values = Tensor(shape, std::move(values));
  }
  return out;
}

int TargetRows(const objectives::TaskTarget& t) {
  if (t.values.empty()) return t.labels.shape.empty() ? 0 : t.labels.shape[0];
  return t.values.dim(0);
}

objectives::TaskTarget SliceTarget(const objectives::TaskTarget& t, int begin, int end) {
  objectives::TaskTarget out;
  if (t.values.empty()) {
    std::vector<int> rows(static_cast<std::size_t>(end - begin));
    std::iota(rows.begin(), rows.end(), begin);
    out.labels = t.labels.Gather(rows);
  } else {
    out.values = t.values.Slice(begin, end);
  }
  return out;
}

double Percentile(std::vector<double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// After our BYE: collect the peer's METRICS and BYE, tolerating a peer that
// has already gone away.
void DrainAfterBye(Channel& channel, double timeout, SessionOutcome& out) {
  try {
    for (;;) {
      const SplitMessage m = channel.Receive(timeout);
      if (m.type == MsgType::kMetrics) out.peer_metrics = JsonBody(m).dump();
      if (m.type == MsgType::kBye) return;
    }
  } catch (const Error&) {
  }
}

void SendMetricsAndBye(Channel& channel, std::uint64_t batch_index, const SessionOutcome& out) {
  const double mean =
      out.batch_losses.empty()
          ? 0.0
          : std::accumulate(out.batch_losses.begin(), out.batch_losses.end(), 0.0) /
                static_cast<double>(out.batch_losses.size());
  channel.Send(JsonMessage(MsgType::kMetrics, batch_index,
                           {{"batches", out.batches},
                            {"epochs", out.epochs_started},
                            {"mean_loss", mean}}));
  channel.Send(Message(MsgType::kBye, batch_index));
}

}  // namespace

void ValidateSessionConfig(const SessionConfig& c) {
  Require(!c.key.empty(), ErrorKind::kConfig, "runtime.key must not be empty");
  Require(!c.task_id.empty(), ErrorKind::kConfig, "runtime.task_id must not be empty");
  Require(c.batch_size > 0, ErrorKind::kConfig, "batch_size must be positive");
  Require(c.epochs >= 0, ErrorKind::kConfig, "epochs must be non-negative");
  Require(c.timeout_seconds > 0, ErrorKind::kConfig, "runtime.timeout_seconds must be positive");
  Require(c.wire_dtype != WireDType::kU8, ErrorKind::kConfig,
          "runtime.wire_dtype must be f32 or f16");
}

const char* SessionStatusName(SessionStatus status) {
  switch (status) {
    case SessionStatus::kCompleted: return "completed";
    case SessionStatus::kStopped: return "stopped";
    case SessionStatus::kPeerClosed: return "peer_closed";
    case SessionStatus::kBudgetExhausted: return "budget_exhausted";
    case SessionStatus::kAborted: return "aborted";
  }
  return "?";
}

std::vector<RttSummary> MeasureRtt(const std::vector<RttRecord>& records) {
  std::map<std::size_t, std::vector<double>> groups;
  for (const auto& r : records) groups[r.payload_bytes].push_back(r.rtt_ms);
  std::vector<RttSummary> out;
  for (auto& [bytes, values] : groups) {
    std::sort(values.begin(), values.end());
    RttSummary s;
    s.payload_bytes = bytes;
    s.count = values.size();
    s.mean_ms = std::accumulate(values.begin(), values.end(), 0.0) /
                static_cast<double>(values.size());
    s.p50_ms = Percentile(values, 0.5);
    s.p95_ms = Percentile(values, 0.95);
    out.push_back(s);
  }
  return out;
}

SessionOutcome RunProducer(model::MultiTaskModel& model, const data::Dataset& data,
                           const SessionConfig& config, const ProducerOptions& options,
                           Channel& channel) {
  SessionOutcome out;
  std::uint64_t index = 0;
  try {
    ValidateSessionConfig(config);
    const SessionKey key(config.key);
    const std::size_t task = model.IndexOf(config.task_id);
    data.TaskIndex(config.task_id);
    Shape expect = model.input_shape();
    expect.insert(expect.begin(), data.size());
    Require(data.size() > 0 && data.images.shape() == expect, ErrorKind::kConfig,
            "dataset images " + ShapeToString(data.images.shape()) +
                " do not match the model input " + ShapeToString(expect));

    channel.Send([&] {
      SplitMessage hello = JsonMessage(MsgType::kHello, 0,
                                       {{"version", 1},
                                        {"task_id", config.task_id},
                                        {"feature_shape", model.feature_shape()},
                                        {"dtype", DTypeName(config.wire_dtype)},
                                        {"batch_size", config.batch_size},
                                        {"epochs", config.epochs},
                                        {"num_samples", data.size()}});
      hello.tensors.push_back(TagTensor(key.HelloTag('P', config.session_id)));
      return hello;
    }());
    const SplitMessage reply = channel.Receive(config.timeout_seconds);
    Require(reply.type == MsgType::kHello, ErrorKind::kProtocol,
            std::string("expected HELLO, got ") + MsgTypeName(reply.type));
    CheckTag(reply, key.HelloTag('C', config.session_id));
    out.wire_dtype = ParseDType(JsonBody(reply).value("dtype", "f32"));

    std::vector<nn::Parameter*> params;
    if (options.train_encoder) params = model.EncoderParameters();
    for (auto* p : model.MetamorphParameters(task)) params.push_back(p);
    nn::Optimizer optimizer(params, options.optimizer);
    nn::Sequential& encoder = model.encoder();
    model::Metamorph& metamorph = model.branch(task).metamorph;

    std::mt19937_64 rng(config.seed);
    std::optional<privacy::NoiseSource> noise;
    privacy::DPConfig dp;
    if (options.dp) {
      dp = train::AccountingConfig(*options.dp, data.size(), config.batch_size);
      privacy::ValidateDPConfig(dp);
      noise.emplace(config.seed ^ 0x9e3779b97f4a7c15ULL);
      out.ledger.emplace(dp);
    }

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      optimizer.SetEpoch(epoch);
      // Same draw order as the in-process trainer: shuffle, then one flip
      // draw per sample, batch by batch.
      std::vector<data::Dataset> batches;
      for (const auto& rows : data::ShuffledBatches(data.size(), config.batch_size, rng)) {
        batches.push_back(data.Subset(rows));
        if (config.augment_flip) data::RandomHorizontalFlip(batches.back(), rng);
      }
      std::vector<const objectives::TaskTarget*> parts;
      for (const auto& b : batches) parts.push_back(&b.Target(config.task_id));
      const auto plaintext = EncodeTargets(ConcatTargets(parts));
      SplitMessage labels = Message(MsgType::kLabelsEnc, index);
      labels.tensors.push_back(
          FeatureTensor::FromBytes(key.Seal(plaintext, config.session_id, index)));
      channel.Send(std::move(labels));
      ++out.epochs_started;

      for (const auto& batch : batches) {
        if (config.max_batches >= 0 && out.batches >= config.max_batches) {
          out.status = SessionStatus::kStopped;
          channel.Send(Message(MsgType::kBye, index));
          DrainAfterBye(channel, config.timeout_seconds, out);
          out.channel = channel.stats();
          return out;
        }
        std::optional<privacy::PrivacyLedger> next;
        if (options.dp) {
          next = *out.ledger;
          next->Step(dp.noise_multiplier, dp.sample_rate);
          if (next->Exhausted()) {
            out.status = SessionStatus::kBudgetExhausted;
            channel.Send(Message(MsgType::kBye, index));
            DrainAfterBye(channel, config.timeout_seconds, out);
            out.channel = channel.stats();
            return out;
          }
        }

        for (auto* p : params) p->grad.Fill(0.0f);
        const Tensor features = metamorph.Forward(encoder.Forward(batch.images));
        SplitMessage forward = Message(MsgType::kForwardFeatures, index);
        forward.tensors.push_back(FeatureTensor::FromTensor(features, out.wire_dtype));
        RttRecord rtt;
        rtt.batch_index = index;
        rtt.payload_bytes = forward.PayloadBytes();
        rtt.send_ns = NowNs();
        channel.Send(std::move(forward));

        SplitMessage reply_msg;
        for (;;) {
          reply_msg = channel.Receive(config.timeout_seconds);
          if (reply_msg.type == MsgType::kMetrics) {
            out.peer_metrics = JsonBody(reply_msg).dump();
            continue;
          }
          break;
        }
        if (reply_msg.type == MsgType::kBye) {
          out.status = SessionStatus::kPeerClosed;
          out.channel = channel.stats();
          return out;
        }
        Require(reply_msg.type == MsgType::kBackwardGrads, ErrorKind::kProtocol,
                std::string("expected BACKWARD_GRADS, got ") + MsgTypeName(reply_msg.type));
        Require(reply_msg.batch_index == index, ErrorKind::kProtocol,
                "batch index mismatch: sent " + std::to_string(index) + ", got " +
                    std::to_string(reply_msg.batch_index));
        Require(reply_msg.tensors.size() == 1, ErrorKind::kProtocol,
                "BACKWARD_GRADS must carry one tensor");
        const Tensor grad = reply_msg.tensors[0].ToTensor();
        rtt.ack_ns = NowNs();
        rtt.rtt_ms = static_cast<double>(rtt.ack_ns - rtt.send_ns) / 1e6;
        out.rtt.push_back(rtt);
        Require(grad.shape() == features.shape(), ErrorKind::kProtocol,
                "gradient shape " + ShapeToString(grad.shape()) + " does not match features " +
                    ShapeToString(features.shape()));

        if (!options.dp) {
          const Tensor g = metamorph.Backward(grad);
          if (options.train_encoder) encoder.Backward(g);
        } else {
          // The consumer returns the gradient of the batch-mean loss; row s
          // times n is sample s's own gradient.
          const int n = batch.size();
          privacy::GradientSet per_sample;
          for (int s = 0; s < n; ++s) {
            for (auto* p : params) p->grad.Fill(0.0f);
            const int row[] = {s};
            const Tensor x = batch.images.Gather(row);
            metamorph.Forward(encoder.Forward(x));
            Tensor gs = grad.Gather(row);
            gs *= static_cast<float>(n);
            const Tensor g = metamorph.Backward(gs);
            if (options.train_encoder) encoder.Backward(g);
            per_sample.push_back(nn::FlattenGrads(params));
          }
          const auto clipped = privacy::ClipPerSample(per_sample, dp.clip_threshold);
          nn::AssignGrads(params, privacy::NoisyAggregate(clipped, dp.noise_multiplier,
                                                          dp.clip_threshold, *noise));
          *out.ledger = std::move(*next);
        }
        optimizer.Step();
        ++out.batches;
        ++index;
      }
    }
    channel.Send(Message(MsgType::kBye, index));
    DrainAfterBye(channel, config.timeout_seconds, out);
  } catch (const Error& e) {
    out.status = SessionStatus::kAborted;
    out.error_kind = e.kind();
    out.error = e.what();
    channel.Abort(e.what());
  }
  out.channel = channel.stats();
  return out;
}

SessionOutcome RunConsumer(nn::Sequential& head, const train::TaskSpec& task,
                           const SessionConfig& config, const nn::OptimizerConfig& optimizer_config,
                           Channel& channel) {
  SessionOutcome out;
  std::uint64_t next = 0;
  try {
    ValidateSessionConfig(config);
    const SessionKey key(config.key);
    const SplitMessage hello = channel.Receive(config.timeout_seconds);
    Require(hello.type == MsgType::kHello, ErrorKind::kProtocol,
            std::string("expected HELLO, got ") + MsgTypeName(hello.type));
    CheckTag(hello, key.HelloTag('P', config.session_id));
    const json offer = JsonBody(hello);
    const std::string offered_task = offer.value("task_id", "");
    Require(offered_task == task.task_id, ErrorKind::kSession,
            "producer offers task '" + offered_task + "', this consumer serves '" +
                task.task_id + "'");
    const bool f16 = offer.value("dtype", "f32") == "f16" &&
                     config.wire_dtype == WireDType::kF16;
    out.wire_dtype = f16 ? WireDType::kF16 : WireDType::kF32;
    const long expected_batches =
        offer.value("epochs", 0L) *
        train::StepsPerEpoch(offer.value("num_samples", 0), std::max(1, offer.value("batch_size", 1)));
    SplitMessage reply = JsonMessage(MsgType::kHello, 0,
                                     {{"version", 1},
                                      {"task_id", task.task_id},
                                      {"dtype", DTypeName(out.wire_dtype)}});
    reply.tensors.push_back(TagTensor(key.HelloTag('C', config.session_id)));
    channel.Send(std::move(reply));

    const auto params = head.Parameters();
    nn::Optimizer optimizer(params, optimizer_config);
    std::optional<objectives::TaskTarget> labels;
    int offset = 0;
    for (;;) {
      const SplitMessage m = channel.Receive(config.timeout_seconds);
      if (m.type == MsgType::kLabelsEnc) {
        Require(m.batch_index == next, ErrorKind::kProtocol,
                "LABELS_ENC for batch " + std::to_string(m.batch_index) + ", expected " +
                    std::to_string(next));
        Require(m.tensors.size() == 1 && m.tensors[0].dtype == WireDType::kU8,
                ErrorKind::kProtocol, "LABELS_ENC must carry one byte tensor");
        labels = DecodeTargets(key.Open(m.tensors[0].data, config.session_id, m.batch_index));
        optimizer.SetEpoch(out.epochs_started++);
        offset = 0;
        continue;
      }
      if (m.type == MsgType::kBye) {
        out.status = out.batches >= expected_batches ? SessionStatus::kCompleted
                                                     : SessionStatus::kPeerClosed;
        SendMetricsAndBye(channel, next, out);
        break;
      }
      Require(m.type == MsgType::kForwardFeatures, ErrorKind::kProtocol,
              std::string("unexpected ") + MsgTypeName(m.type));
      Require(m.batch_index == next, ErrorKind::kProtocol,
              "batch index mismatch: expected " + std::to_string(next) + ", got " +
                  std::to_string(m.batch_index));
      if (config.max_batches >= 0 && out.batches >= config.max_batches) {
        out.status = SessionStatus::kStopped;
        SendMetricsAndBye(channel, next, out);
        break;
      }
      Require(labels.has_value(), ErrorKind::kProtocol, "features arrived before labels");
      Require(m.tensors.size() == 1, ErrorKind::kProtocol,
              "FORWARD_FEATURES must carry one tensor");
      const Tensor features = m.tensors[0].ToTensor();
      Require(features.ndim() >= 1, ErrorKind::kProtocol, "scalar feature tensor");
      const int n = features.dim(0);
      Require(offset + n <= TargetRows(*labels), ErrorKind::kProtocol,
              "batch overruns the epoch's labels");
      const objectives::TaskTarget target = SliceTarget(*labels, offset, offset + n);

      for (auto* p : params) p->grad.Fill(0.0f);
      const Tensor scores = head.Forward(features);
      Tensor grad;
      const double loss = objectives::TaskLoss(task.loss, scores, target, &grad);
      const Tensor boundary = head.Backward(grad);
      SplitMessage back = Message(MsgType::kBackwardGrads, next);
      back.tensors.push_back(FeatureTensor::FromTensor(boundary, out.wire_dtype));
      channel.Send(std::move(back));
      optimizer.Step();
      out.batch_losses.push_back(loss);
      offset += n;
      ++out.batches;
      ++next;
    }
  } catch (const Error& e) {
    out.status = SessionStatus::kAborted;
    out.error_kind = e.kind();
    out.error = e.what();
    channel.Abort(e.what());
  }
  out.channel = channel.stats();
  return out;
}

std::vector<RttRecord> RunRttProbe(Channel& channel,
                                   const std::vector<std::size_t>& payload_bytes,
                                   int repetitions, double timeout_seconds) {
  std::vector<RttRecord> records;
  std::uint64_t index = 0;
  for (std::size_t bytes : payload_bytes) {
    Require(bytes % 4 == 0 && bytes > 0, ErrorKind::kConfig,
            "probe payloads must be positive multiples of 4 bytes");
    const Tensor zeros({1, static_cast<int>(bytes / 4), 1, 1});
    for (int r = 0; r < repetitions; ++r, ++index) {
      SplitMessage m = Message(MsgType::kForwardFeatures, index);
      m.tensors.push_back(FeatureTensor::FromTensor(zeros));
      RttRecord rec;
      rec.batch_index = index;
      rec.payload_bytes = m.PayloadBytes();
      rec.send_ns = NowNs();
      channel.Send(std::move(m));
      const SplitMessage reply = channel.Receive(timeout_seconds);
      rec.ack_ns = NowNs();
      Require(reply.type == MsgType::kBackwardGrads && reply.batch_index == index,
              ErrorKind::kProtocol, "probe reply out of step");
      rec.rtt_ms = static_cast<double>(rec.ack_ns - rec.send_ns) / 1e6;
      records.push_back(rec);
    }
  }
  channel.Send(Message(MsgType::kBye, index));
  return records;
}

long ServeEcho(Channel& channel, double timeout_seconds) {
  long echoed = 0;
  for (;;) {
    SplitMessage m = channel.Receive(timeout_seconds);
    if (m.type == MsgType::kBye) return echoed;
    Require(m.type == MsgType::kForwardFeatures, ErrorKind::kProtocol,
            std::string("echo expects FORWARD_FEATURES, got ") + MsgTypeName(m.type));
    m.type = MsgType::kBackwardGrads;
    channel.Send(std::move(m));
    ++echoed;
  }
}

}  // namespace mtsplit::runtime
