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

// mtsplit command-line entry point.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mtsplit/cli/commands.h"
#include "mtsplit/error.h"

namespace {

namespace cli = mtsplit::cli;
namespace fs = std::filesystem;

// "--a.b=v" and "--a.b v" left over by the parser become config overrides.
std::vector<std::string> CollectOverrides(const CLI::App& sub, std::vector<std::string> sets) {
  const auto extras = sub.remaining();
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    mtsplit::Require(arg.rfind("--", 0) == 0 && arg.size() > 2, mtsplit::ErrorKind::kConfig,
                     "unexpected argument '" + arg + "'");
    const std::string body = arg.substr(2);
    if (body.find('=') != std::string::npos) {
      sets.push_back(body);
    } else {
      mtsplit::Require(i + 1 < extras.size(), mtsplit::ErrorKind::kConfig,
                       "override --" + body + " needs a value");
      sets.push_back(body + "=" + extras[++i]);
    }
  }
  return sets;
}

fs::path DefaultOut(const std::string& out, const fs::path& checkpoint) {
  if (!out.empty()) return out;
  const fs::path parent = checkpoint.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

int SessionExit(const mtsplit::runtime::SessionOutcome& o) {
  if (o.status == mtsplit::runtime::SessionStatus::kBudgetExhausted) return cli::kExitBudget;
  if (o.error_kind) return cli::ExitCodeFor(*o.error_kind);
  return o.status == mtsplit::runtime::SessionStatus::kAborted ? cli::kExitRuntime
                                                                : cli::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task split learning with task and input privacy"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, reference, out;
  std::vector<std::string> sets;
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--set", sets, "Config override path=value (repeatable)");
    sub->allow_extras();
  };

  auto* train = app.add_subcommand("train", "Run the configured training regime");
  train->add_option("--config", config_path, "Experiment config (JSON)")->required();
  add_overrides(train);

  auto* interchange =
      app.add_subcommand("eval-interchange", "Score every metamorph against every head");
  interchange->add_option("--checkpoint", checkpoint, "Checkpoint archive")->required();
  interchange->add_option("--out", out, "Output directory (default: checkpoint's)");
  add_overrides(interchange);

  auto* attack = app.add_subcommand("attack-reconstruct", "Decoder inversion attack");
  attack->add_option("--checkpoint", checkpoint, "Private checkpoint")->required();
  attack->add_option("--reference", reference, "Non-private checkpoint for comparison");
  attack->add_option("--out", out, "Output directory (default: checkpoint's)");
  add_overrides(attack);

  std::vector<std::size_t> probe_bytes;
  int repetitions = 20;
  auto* serve = app.add_subcommand("serve", "Producer side of a split session");
  serve->add_option("--config", config_path, "Experiment config (JSON)")->required();
  serve->add_option("--checkpoint", checkpoint, "Initial parameters");
  serve->add_option("--probe-bytes", probe_bytes, "RTT probe payload sizes instead of training")
      ->delimiter(',');
  serve->add_option("--repetitions", repetitions, "Frames per probe size")
      ->check(CLI::PositiveNumber);
  add_overrides(serve);

  bool echo = false;
  auto* consume = app.add_subcommand("consume", "Consumer side of a split session");
  consume->add_option("--config", config_path, "Experiment config (JSON)")->required();
  consume->add_flag("--echo", echo, "Echo frames for an RTT probe");
  add_overrides(consume);

  double q = 0, sigma = -1, delta = 0, target = -1;
  long steps = 0;
  auto* accountant = app.add_subcommand("accountant", "Privacy accounting queries");
  accountant->add_option("--q", q, "Sampling rate")->required();
  accountant->add_option("--steps", steps, "Number of DP steps")->required();
  accountant->add_option("--delta", delta, "Target delta")->required();
  auto* sigma_opt = accountant->add_option("--sigma", sigma, "Noise multiplier; prints epsilon");
  auto* target_opt =
      accountant->add_option("--target-epsilon", target, "Prints the sigma meeting this epsilon");
  sigma_opt->excludes(target_opt);

  auto* gen = app.add_subcommand("gen-data", "Write synthetic scenes as an image folder");
  gen->add_option("--config", config_path, "Experiment config (JSON)")->required();
  gen->add_option("--out", out, "Output directory")->required();
  add_overrides(gen);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitConfig;
  }

  try {
    if (train->parsed()) {
      const auto config = cli::LoadConfig(config_path, CollectOverrides(*train, sets));
      const auto report = cli::RunTrain(config, std::cout);
      return report.at("status") == "budget_exhausted" ? cli::kExitBudget : cli::kExitOk;
    }
    if (interchange->parsed()) {
      cli::RunEvalInterchange(checkpoint, CollectOverrides(*interchange, sets),
                              DefaultOut(out, checkpoint), std::cout);
      return cli::kExitOk;
    }
    if (attack->parsed()) {
      std::optional<fs::path> ref;
      if (!reference.empty()) ref = reference;
      cli::RunAttackReconstruct(checkpoint, ref, CollectOverrides(*attack, sets),
                                DefaultOut(out, checkpoint), std::cout);
      return cli::kExitOk;
    }
    if (serve->parsed()) {
      const auto config = cli::LoadConfig(config_path, CollectOverrides(*serve, sets));
      cli::ServeOptions options;
      if (!checkpoint.empty()) options.checkpoint = checkpoint;
      options.probe_bytes = probe_bytes;
      options.probe_repetitions = repetitions;
      return SessionExit(cli::RunServe(config, options, std::cout));
    }
    if (consume->parsed()) {
      const auto config = cli::LoadConfig(config_path, CollectOverrides(*consume, sets));
      return SessionExit(cli::RunConsume(config, echo, std::cout));
    }
    if (accountant->parsed()) {
      mtsplit::Require(sigma_opt->count() + target_opt->count() == 1,
                       mtsplit::ErrorKind::kConfig, "give --sigma or --target-epsilon");
      std::cout << (sigma_opt->count() ? cli::AccountantEpsilon(q, sigma, steps, delta)
                                       : cli::AccountantSigma(q, target, steps, delta))
                << '\n';
      return cli::kExitOk;
    }
    if (gen->parsed()) {
      const auto config = cli::LoadConfig(config_path, CollectOverrides(*gen, sets));
      cli::RunGenData(config, out, std::cout);
      return cli::kExitOk;
    }
  } catch (const mtsplit::Error& e) {
    std::cerr << "error (" << mtsplit::ErrorKindName(e.kind()) << "): " << e.what() << '\n';
    return cli::ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitRuntime;
  }
  return cli::kExitOk;
}
