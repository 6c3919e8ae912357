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

#ifndef MTSPLIT_CLI_COMMANDS_H_
#define MTSPLIT_CLI_COMMANDS_H_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtsplit/cli/checkpoint.h"
#include "mtsplit/cli/config.h"
#include "mtsplit/runtime/session.h"

namespace mtsplit::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr int kExitBudget = 4;

int ExitCodeFor(ErrorKind kind);

// A model rebuilt from an archive's config snapshot and parameters.
struct LoadedModel {
  ExperimentConfig config;
  model::MultiTaskModel model;
};

model::MultiTaskModel BuildModel(const ExperimentConfig& config);
// Overrides apply to the stored config before the model is rebuilt.
LoadedModel LoadModel(const std::filesystem::path& checkpoint,
                      const std::vector<std::string>& overrides = {});

// train: checkpoint.mmck, metrics.csv, report.json and report.txt in the
// output directory. Returns the report; report["status"] is "completed" or
// "budget_exhausted" (the checkpoint is written either way).
nlohmann::json RunTrain(const ExperimentConfig& config, std::ostream& log);

// eval-interchange: interchange.txt, interchange.csv and embeddings.csv.
nlohmann::json RunEvalInterchange(const std::filesystem::path& checkpoint,
                                  const std::vector<std::string>& overrides,
                                  const std::filesystem::path& out_dir, std::ostream& log);

// attack-reconstruct against a private checkpoint, optionally next to a
// non-private reference: reconstruction.json, reconstruction.txt and
// reconstruction_grid.png (rows: originals, non-private reconstructions when
// a reference is given, private untrained, private trained).
nlohmann::json RunAttackReconstruct(const std::filesystem::path& checkpoint,
                                    const std::optional<std::filesystem::path>& reference,
                                    const std::vector<std::string>& overrides,
                                    const std::filesystem::path& out_dir, std::ostream& log);

struct ServeOptions {
  std::optional<std::filesystem::path> checkpoint;  // initial parameters
  // Non-empty switches to the RTT probe with these payload sizes.
  std::vector<std::size_t> probe_bytes;
  int probe_repetitions = 20;
  // Called with the bound port before waiting for the consumer.
  std::function<void(int)> on_listening;
};

// serve (producer side): session.json, rtt.csv, rtt_summary.csv and, after
// training sessions, checkpoint.mmck.
runtime::SessionOutcome RunServe(const ExperimentConfig& config, const ServeOptions& options,
                                 std::ostream& log);

// consume (consumer side, or an echo peer for RTT probes): session.json.
runtime::SessionOutcome RunConsume(const ExperimentConfig& config, bool echo,
                                   std::ostream& log);

// Writes the rows of an RTT summary table.
void WriteRttSummary(const std::filesystem::path& path,
                     const std::vector<runtime::RttSummary>& rows);

// accountant: epsilon for (q, sigma, steps, delta) as decimal text.
std::string AccountantEpsilon(double q, double sigma, long steps, double delta);
// Smallest sigma meeting epsilon for (q, steps, delta).
std::string AccountantSigma(double q, double epsilon, long steps, double delta);

// gen-data: PNG files plus labels.csv for the classification pair.
void RunGenData(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                std::ostream& log);

}  // namespace mtsplit::cli

#endif  // MTSPLIT_CLI_COMMANDS_H_
