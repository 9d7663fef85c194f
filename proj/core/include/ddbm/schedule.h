// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_SCHEDULE_H_
#define DDBM_SCHEDULE_H_

#include <nlohmann/json_fwd.hpp>

#include "ddbm/types.h"

namespace ddbm {

enum class ScheduleKind { kVP, kVE };

struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::kVE;
  double t_min = 1e-3;
  double T = 1.0;
  // VE: sigma(t) = sigma_max * t / T. sigma_min is kept for the config schema.
  double sigma_min = 1e-3;
  double sigma_max = 1.0;
  // VP: linear beta(t) = beta_min + (beta_max - beta_min) t / T.
  double beta_min = 0.1;
  double beta_max = 20.0;
  // Data moments used by the scaling functions.
  double sigma_data0 = 0.5;
  double sigma_dataT = 0.5;
  double sigma_cov0T = 0.0;
};

void to_json(nlohmann::json& j, const ScheduleConfig& c);
// Missing keys keep their defaults; wrong types or invalid values throw
// ConfigError naming the field.
void from_json(const nlohmann::json& j, ScheduleConfig& c);

class NoiseSchedule {
 public:
  NoiseSchedule() : NoiseSchedule(ScheduleConfig{}) {}
  explicit NoiseSchedule(const ScheduleConfig& config);

  const ScheduleConfig& config() const { return config_; }
  ScheduleKind kind() const { return config_.kind; }
  double t_min() const { return config_.t_min; }
  double horizon() const { return config_.T; }

  double Alpha(double t) const;
  double Sigma(double t) const;
  double SigmaSquared(double t) const;
  double Snr(double t) const;
  double DLogAlpha(double t) const;
  double DSigmaSquared(double t) const;

  // Throws DomainError unless t is in [t_min, T].
  void CheckTime(double t) const;

 private:
  // Integral of beta from 0 to t (VP).
  double BetaIntegral(double t) const;

  ScheduleConfig config_;
};

// snr(t) = alpha(t)^2 / sigma(t)^2 with a domain check.
double Snr(const NoiseSchedule& schedule, double t);

}  // namespace ddbm

#endif  // DDBM_SCHEDULE_H_
