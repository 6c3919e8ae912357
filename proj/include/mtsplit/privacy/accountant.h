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

#ifndef MTSPLIT_PRIVACY_ACCOUNTANT_H_
#define MTSPLIT_PRIVACY_ACCOUNTANT_H_

#include <string>
#include <vector>

#include "mtsplit/privacy/dp.h"

namespace mtsplit::privacy {

// Renyi orders tracked by the accountant: 1.25, 1.5, ..., 63.5 and the
// integers 64..256.
const std::vector<double>& DefaultOrders();

// Renyi divergence of one application of the Poisson-subsampled Gaussian
// mechanism with sampling rate q and noise multiplier sigma, at order alpha.
// Returns +inf for sigma == 0 (and q > 0).
double SubsampledGaussianRdp(double q, double sigma, double alpha);

// Smallest epsilon over orders for the accumulated divergences, using
//   eps = rdp - (log delta + log alpha) / (alpha - 1) + log((alpha - 1) / alpha).
// Clamped at 0; +inf when every order is infinite.
double EpsilonFromRdp(const std::vector<double>& orders,
                      const std::vector<double>& rdp, double delta,
                      double* best_order = nullptr);

// Running privacy spend of a training run. Divergences accumulate additively
// per step (composition), so every entry is nondecreasing in the step count.
class PrivacyLedger {
 public:
  explicit PrivacyLedger(DPConfig config,
                         std::vector<double> orders = DefaultOrders());

  // Records one mechanism application.
  void Step(double noise_multiplier, double sample_rate);
  void Step() { Step(config_.noise_multiplier, config_.sample_rate); }

  long steps() const { return steps_; }
  const DPConfig& config() const { return config_; }
  DPConfig& mutable_config() { return config_; }
  const std::vector<double>& orders() const { return orders_; }
  const std::vector<double>& rdp() const { return rdp_; }

  double Epsilon(double delta) const;
  double Epsilon() const { return Epsilon(config_.target_delta); }
  bool Exhausted() const { return Epsilon() > config_.target_epsilon; }

  // Text round-trip used by checkpoints.
  std::string Serialize() const;
  static PrivacyLedger Deserialize(const std::string& text);

 private:
  DPConfig config_;
  std::vector<double> orders_;
  std::vector<double> rdp_;
  long steps_ = 0;
  // Cached per-step divergences for the last (q, sigma) pair.
  double cached_q_ = -1.0;
  double cached_sigma_ = -1.0;
  std::vector<double> cached_step_;
};

double ComputeEpsilon(const PrivacyLedger& ledger, double delta);
// Epsilon after `steps` identical applications.
double ComputeEpsilon(double q, double sigma, long steps, double delta);

// Smallest sigma in [1e-2, 1e3] (to within 1e-3) whose epsilon after `steps`
// steps at config.sample_rate is <= config.target_epsilon. Throws
// kCalibration with the achievable epsilon range when none qualifies.
double CalibrateSigma(const DPConfig& config, long steps);

}  // namespace mtsplit::privacy

#endif  // MTSPLIT_PRIVACY_ACCOUNTANT_H_
