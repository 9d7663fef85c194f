// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/schedule.h"

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "ddbm/config.h"

namespace ddbm {

void to_json(nlohmann::json& j, const ScheduleConfig& c) {
  j = nlohmann::json{{"kind", c.kind == ScheduleKind::kVE ? "VE" : "VP"},
                     {"t_min", c.t_min},
                     {"T", c.T},
                     {"sigma_min", c.sigma_min},
                     {"sigma_max", c.sigma_max},
                     {"beta_min", c.beta_min},
                     {"beta_max", c.beta_max},
                     {"sigma_data0", c.sigma_data0},
                     {"sigma_dataT", c.sigma_dataT},
                     {"sigma_cov0T", c.sigma_cov0T}};
}

void from_json(const nlohmann::json& j, ScheduleConfig& c) {
  const std::string kind = GetOr<std::string>(j, "kind", "VE", "schedule");
  if (kind == "VE") {
    c.kind = ScheduleKind::kVE;
  } else if (kind == "VP") {
    c.kind = ScheduleKind::kVP;
  } else {
    throw ConfigError("schedule.kind: expected VE or VP, got '" + kind + "'");
  }
  c.t_min = GetOr(j, "t_min", c.t_min, "schedule");
  c.T = GetOr(j, "T", c.T, "schedule");
  c.sigma_min = GetOr(j, "sigma_min", c.sigma_min, "schedule");
  c.sigma_max = GetOr(j, "sigma_max", c.sigma_max, "schedule");
  c.beta_min = GetOr(j, "beta_min", c.beta_min, "schedule");
  c.beta_max = GetOr(j, "beta_max", c.beta_max, "schedule");
  c.sigma_data0 = GetOr(j, "sigma_data0", c.sigma_data0, "schedule");
  c.sigma_dataT = GetOr(j, "sigma_dataT", c.sigma_dataT, "schedule");
  c.sigma_cov0T = GetOr(j, "sigma_cov0T", c.sigma_cov0T, "schedule");
}

NoiseSchedule::NoiseSchedule(const ScheduleConfig& config) : config_(config) {
  if (!(config.t_min > 0.0) || !(config.T > config.t_min)) {
    throw ConfigError("schedule: need 0 < t_min < T");
  }
  if (config.kind == ScheduleKind::kVE && !(config.sigma_max > 0.0)) {
    throw ConfigError("schedule.sigma_max must be positive");
  }
  if (config.kind == ScheduleKind::kVP &&
      (!(config.beta_min > 0.0) || config.beta_max < config.beta_min)) {
    throw ConfigError("schedule: need 0 < beta_min <= beta_max");
  }
  if (!(config.sigma_data0 > 0.0) || !(config.sigma_dataT >= 0.0) ||
      !(config.sigma_cov0T >= 0.0)) {
    throw ConfigError("schedule: data moments must be non-negative, sigma_data0 > 0");
  }
}

void NoiseSchedule::CheckTime(double t) const {
  if (!(t >= config_.t_min && t <= config_.T)) {
    throw DomainError("time " + std::to_string(t) + " outside [" +
                      std::to_string(config_.t_min) + ", " +
                      std::to_string(config_.T) + "]");
  }
}

double NoiseSchedule::BetaIntegral(double t) const {
  const double slope = (config_.beta_max - config_.beta_min) / config_.T;
  return config_.beta_min * t + 0.5 * slope * t * t;
}

double NoiseSchedule::Alpha(double t) const {
  if (config_.kind == ScheduleKind::kVE) return 1.0;
  return std::exp(-0.5 * BetaIntegral(t));
}

double NoiseSchedule::Sigma(double t) const { return std::sqrt(SigmaSquared(t)); }

double NoiseSchedule::SigmaSquared(double t) const {
  if (config_.kind == ScheduleKind::kVE) {
    const double s = config_.sigma_max * t / config_.T;
    return s * s;
  }
  return -std::expm1(-BetaIntegral(t));
}

double NoiseSchedule::Snr(double t) const {
  const double alpha = Alpha(t);
  return alpha * alpha / SigmaSquared(t);
}

double NoiseSchedule::DLogAlpha(double t) const {
  if (config_.kind == ScheduleKind::kVE) return 0.0;
  const double beta =
      config_.beta_min + (config_.beta_max - config_.beta_min) * t / config_.T;
  return -0.5 * beta;
}

double NoiseSchedule::DSigmaSquared(double t) const {
  if (config_.kind == ScheduleKind::kVE) {
    const double s = config_.sigma_max / config_.T;
    return 2.0 * s * s * t;
  }
  const double alpha = Alpha(t);
  return -2.0 * DLogAlpha(t) * alpha * alpha;
}

double Snr(const NoiseSchedule& schedule, double t) {
  schedule.CheckTime(t);
  return schedule.Snr(t);
}

}  // namespace ddbm
