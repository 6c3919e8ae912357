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

#ifndef MTSPLIT_RUNTIME_SESSION_H_
#define MTSPLIT_RUNTIME_SESSION_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtsplit/data/dataset.h"
#include "mtsplit/error.h"
#include "mtsplit/model/multitask.h"
#include "mtsplit/nn/optimizer.h"
#include "mtsplit/privacy/accountant.h"
#include "mtsplit/runtime/channel.h"
#include "mtsplit/train/trainer.h"

namespace mtsplit::runtime {

struct SessionConfig {
  std::uint64_t session_id = 1;
  std::string key;  // pre-shared, both parties
  std::string task_id;
  // Producer: proposed dtype. Consumer: f16 accepted only if set to f16.
  WireDType wire_dtype = WireDType::kF32;
  int batch_size = 32;
  int epochs = 1;
  std::uint64_t seed = 0;
  bool augment_flip = true;
  double timeout_seconds = 30.0;
  // Stop with BYE after this many batches; negative runs to the end.
  long max_batches = -1;
};

void ValidateSessionConfig(const SessionConfig& config);

enum class SessionStatus {
  kCompleted,
  kStopped,         // this side hit max_batches
  kPeerClosed,      // the peer said BYE early
  kBudgetExhausted,
  kAborted,
};

const char* SessionStatusName(SessionStatus status);

struct RttRecord {
  std::uint64_t batch_index = 0;
  std::size_t payload_bytes = 0;
  std::int64_t send_ns = 0;  // steady clock
  std::int64_t ack_ns = 0;
  double rtt_ms = 0.0;
};

struct RttSummary {
  std::size_t payload_bytes = 0;
  std::size_t count = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
};

// Grouped by payload size, ascending. Percentiles interpolate linearly
// between order statistics.
std::vector<RttSummary> MeasureRtt(const std::vector<RttRecord>& records);

struct SessionOutcome {
  SessionStatus status = SessionStatus::kCompleted;
  long batches = 0;
  int epochs_started = 0;
  WireDType wire_dtype = WireDType::kF32;
  std::vector<double> batch_losses;  // consumer side
  std::vector<RttRecord> rtt;        // producer side
  std::optional<privacy::PrivacyLedger> ledger;
  std::string peer_metrics;  // JSON from the consumer's METRICS record
  std::optional<ErrorKind> error_kind;
  std::string error;
  ChannelStats channel;
};

struct ProducerOptions {
  nn::OptimizerConfig optimizer;
  bool train_encoder = true;
  // When set, producer parameters are trained with clipped, noised
  // per-sample gradients and the ledger caps the run.
  std::optional<privacy::DPConfig> dp;
};

// Drives one session: HELLO, then per epoch LABELS_ENC followed by one
// FORWARD_FEATURES / BACKWARD_GRADS exchange per batch, then BYE. Updates
// the encoder (optionally) and the task's metamorph in place.
SessionOutcome RunProducer(model::MultiTaskModel& model, const data::Dataset& data,
                           const SessionConfig& config, const ProducerOptions& options,
                           Channel& channel);

// Serves one session: trains the head locally and returns boundary
// gradients. Never throws for session-level failures; see the outcome.
SessionOutcome RunConsumer(nn::Sequential& head, const train::TaskSpec& task,
                           const SessionConfig& config, const nn::OptimizerConfig& optimizer,
                           Channel& channel);

// RTT probe, producer half: for each payload size sends `repetitions`
// FORWARD_FEATURES frames of f32 zeros and times the echoed reply.
std::vector<RttRecord> RunRttProbe(Channel& channel,
                                   const std::vector<std::size_t>& payload_bytes,
                                   int repetitions, double timeout_seconds);
// Consumer half: echoes FORWARD_FEATURES as BACKWARD_GRADS until BYE.
// Returns the number of echoed frames.
long ServeEcho(Channel& channel, double timeout_seconds);

}  // namespace mtsplit::runtime

#endif  // MTSPLIT_RUNTIME_SESSION_H_
