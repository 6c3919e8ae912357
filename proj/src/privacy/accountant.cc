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

#include "mtsplit/privacy/accountant.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtsplit/error.h"

namespace mtsplit::privacy {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  const double hi = std::max(a, b), lo = std::min(a, b);
  if (hi == -kInf) return -kInf;
  return hi + std::log1p(std::exp(lo - hi));
}

// log(exp(a) - exp(b)) for a >= b.
double LogSub(double a, double b) {
  if (b == -kInf) return a;
  if (a <= b) return -kInf;
  return a + std::log1p(-std::exp(b - a));
}

double LogErfc(double x) {
  const double r = std::erfc(x);
  if (r > 0.0) return std::log(r);
  // Asymptotic expansion for large positive x.
  return -std::log(M_PI) / 2 - std::log(x) - x * x - 0.5 / (x * x) +
         0.625 / std::pow(x, 4) - 37.0 / 24.0 / std::pow(x, 6) +
         353.0 / 64.0 / std::pow(x, 8);
}

double LogBinomInt(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// log A_alpha for integer alpha: binomial expansion of E[(mu / mu0)^alpha].
double LogAInt(double q, double sigma, int alpha) {
  double log_a = -kInf;
  const double log_q = std::log(q), log_1mq = std::log1p(-q);
  for (int i = 0; i <= alpha; ++i) {
    const double s = LogBinomInt(alpha, i) + i * log_q + (alpha - i) * log_1mq +
                     (static_cast<double>(i) * i - i) / (2.0 * sigma * sigma);
    log_a = LogAdd(log_a, s);
  }
  return log_a;
}

// log A_alpha for fractional alpha, via the two-sided erfc series.
double LogAFrac(double q, double sigma, double alpha) {
  double log_a0 = -kInf, log_a1 = -kInf;
  const double z0 = sigma * sigma * std::log(1.0 / q - 1.0) + 0.5;
  const double log_q = std::log(q), log_1mq = std::log1p(-q);
  const double lg_alpha = std::lgamma(alpha + 1.0);
  for (int i = 0; i < 100000; ++i) {
    const double x = alpha - i + 1.0;
    const double log_coef = lg_alpha - std::lgamma(i + 1.0) - std::lgamma(x);
    const bool negative = x < 0.0 && (static_cast<long>(std::floor(x)) % 2 != 0);
    const double j = alpha - i;
    const double log_t0 = log_coef + i * log_q + j * log_1mq;
    const double log_t1 = log_coef + j * log_q + i * log_1mq;
    const double log_e0 = std::log(0.5) + LogErfc((i - z0) / (std::sqrt(2.0) * sigma));
    const double log_e1 = std::log(0.5) + LogErfc((z0 - j) / (std::sqrt(2.0) * sigma));
    const double log_s0 = log_t0 + (i * i - i) / (2.0 * sigma * sigma) + log_e0;
    const double log_s1 = log_t1 + (j * j - j) / (2.0 * sigma * sigma) + log_e1;
    if (!negative) {
      log_a0 = LogAdd(log_a0, log_s0);
      log_a1 = LogAdd(log_a1, log_s1);
    } else {
      log_a0 = LogSub(log_a0, log_s0);
      log_a1 = LogSub(log_a1, log_s1);
    }
    if (std::max(log_s0, log_s1) < -30.0) break;
  }
  return LogAdd(log_a0, log_a1);
}

}  // namespace

const std::vector<double>& DefaultOrders() {
  static const std::vector<double> orders = [] {
    std::vector<double> o;
    for (int i = 5; i <= 254; ++i) o.push_back(i * 0.25);  // 1.25 .. 63.5
    for (int a = 64; a <= 256; ++a) o.push_back(a);
    return o;
  }();
  return orders;
}

double SubsampledGaussianRdp(double q, double sigma, double alpha) {
  Require(alpha > 1.0, ErrorKind::kConfig, "Renyi order must exceed 1");
  Require(q >= 0.0 && q <= 1.0, ErrorKind::kConfig, "sample rate must lie in [0, 1]");
  if (q == 0.0) return 0.0;
  if (sigma == 0.0) return kInf;
  if (q == 1.0) return alpha / (2.0 * sigma * sigma);
  const double log_a = alpha == std::floor(alpha)
                           ? LogAInt(q, sigma, static_cast<int>(alpha))
                           : LogAFrac(q, sigma, alpha);
  return log_a / (alpha - 1.0);
}

double EpsilonFromRdp(const std::vector<double>& orders,
                      const std::vector<double>& rdp, double delta,
                      double* best_order) {
  Require(orders.size() == rdp.size(), ErrorKind::kConfig,
          "orders and divergences differ in length");
  Require(delta > 0.0 && delta < 1.0, ErrorKind::kConfig, "delta must lie in (0, 1)");
  double best = kInf;
  double arg = orders.empty() ? 0.0 : orders.front();
  for (std::size_t i = 0; i < orders.size(); ++i) {
    const double a = orders[i];
    if (!std::isfinite(rdp[i])) continue;
    const double eps = rdp[i] - (std::log(delta) + std::log(a)) / (a - 1.0) +
                       std::log((a - 1.0) / a);
    if (eps < best) {
      best = eps;
      arg = a;
    }
  }
  if (best_order) *best_order = arg;
  return std::max(best, 0.0);
}

PrivacyLedger::PrivacyLedger(DPConfig config, std::vector<double> orders)
    : config_(config), orders_(std::move(orders)), rdp_(orders_.size(), 0.0) {
  ValidateDPConfig(config_);
}

void PrivacyLedger::Step(double noise_multiplier, double sample_rate) {
  Require(noise_multiplier >= 0.0, ErrorKind::kConfig, "noise multiplier must be >= 0");
  if (noise_multiplier != cached_sigma_ || sample_rate != cached_q_) {
    cached_step_.resize(orders_.size());
    for (std::size_t i = 0; i < orders_.size(); ++i) {
      cached_step_[i] = SubsampledGaussianRdp(sample_rate, noise_multiplier, orders_[i]);
    }
    cached_sigma_ = noise_multiplier;
    cached_q_ = sample_rate;
  }
  for (std::size_t i = 0; i < orders_.size(); ++i) rdp_[i] += cached_step_[i];
  ++steps_;
}

double PrivacyLedger::Epsilon(double delta) const {
  if (steps_ == 0) return 0.0;
  return EpsilonFromRdp(orders_, rdp_, delta);
}

std::string PrivacyLedger::Serialize() const {
  nlohmann::json j;
  j["clip_threshold"] = config_.clip_threshold;
  j["noise_multiplier"] = config_.noise_multiplier;
  j["sample_rate"] = config_.sample_rate;
  j["target_epsilon"] = config_.target_epsilon;
  j["target_delta"] = config_.target_delta;
  j["steps"] = steps_;
  j["orders"] = orders_;
  // json has no infinity; a null marks an infinite divergence.
  nlohmann::json rdp = nlohmann::json::array();
  for (double v : rdp_) rdp.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json());
  j["rdp"] = rdp;
  return j.dump();
}

PrivacyLedger PrivacyLedger::Deserialize(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    DPConfig c;
    c.clip_threshold = j.at("clip_threshold").is_null()
                           ? kInf
                           : j.at("clip_threshold").get<double>();
    c.noise_multiplier = j.at("noise_multiplier").get<double>();
    c.sample_rate = j.at("sample_rate").get<double>();
    c.target_epsilon = j.at("target_epsilon").get<double>();
    c.target_delta = j.at("target_delta").get<double>();
    PrivacyLedger ledger(c, j.at("orders").get<std::vector<double>>());
    ledger.steps_ = j.at("steps").get<long>();
    const auto& rdp = j.at("rdp");
    Require(rdp.size() == ledger.orders_.size(), ErrorKind::kCorruption,
            "ledger divergence count does not match orders");
    for (std::size_t i = 0; i < rdp.size(); ++i) {
      ledger.rdp_[i] = rdp[i].is_null() ? kInf : rdp[i].get<double>();
    }
    return ledger;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kCorruption, std::string("malformed privacy ledger: ") + e.what());
  }
}

double ComputeEpsilon(const PrivacyLedger& ledger, double delta) {
  return ledger.Epsilon(delta);
}

double ComputeEpsilon(double q, double sigma, long steps, double delta) {
  Require(steps >= 0, ErrorKind::kConfig, "step count must be >= 0");
  if (steps == 0) return 0.0;
  const std::vector<double>& orders = DefaultOrders();
  std::vector<double> rdp(orders.size());
  for (std::size_t i = 0; i < orders.size(); ++i) {
    rdp[i] = SubsampledGaussianRdp(q, sigma, orders[i]) * static_cast<double>(steps);
  }
  return EpsilonFromRdp(orders, rdp, delta);
}

double CalibrateSigma(const DPConfig& config, long steps) {
  ValidateDPConfig(config);
  Require(steps > 0, ErrorKind::kConfig, "calibration needs a positive step count");
  constexpr double kLo = 1e-2, kHi = 1e3;
  const double q = config.sample_rate, delta = config.target_delta;
  const double target = config.target_epsilon;
  const double eps_hi = ComputeEpsilon(q, kHi, steps, delta);
  if (eps_hi > target) {
    const double eps_lo = ComputeEpsilon(q, kLo, steps, delta);
    std::ostringstream msg;
    msg << "target epsilon " << target << " unattainable for sigma in [" << kLo
        << ", " << kHi << "]: achievable epsilon range is [" << eps_hi << ", "
        << eps_lo << "] at q=" << q << ", T=" << steps << ", delta=" << delta;
    Fail(ErrorKind::kCalibration, msg.str());
  }
  if (ComputeEpsilon(q, kLo, steps, delta) <= target) return kLo;
  double lo = kLo, hi = kHi;
  while (hi - lo > 5e-4) {
    const double mid = hi / lo > 2.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if (ComputeEpsilon(q, mid, steps, delta) <= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace mtsplit::privacy
