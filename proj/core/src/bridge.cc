// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/bridge.h"

#include <cmath>

#include "ddbm/random.h"

namespace ddbm {

DriftDiffusion ComputeDriftDiffusion(const NoiseSchedule& schedule,
                                     const Vector& a_t, double t) {
  schedule.CheckTime(t);
  DriftDiffusion out;
  const double dlog_alpha = schedule.DLogAlpha(t);
  out.drift = dlog_alpha * a_t;
  out.g2 = schedule.DSigmaSquared(t) -
           2.0 * dlog_alpha * schedule.SigmaSquared(t);
  return out;
}

BridgeCoefficients ComputeBridgeCoefficients(const NoiseSchedule& schedule,
                                             double t) {
  schedule.CheckTime(t);
  const double T = schedule.horizon();
  const double alpha_t = schedule.Alpha(t);
  const double alpha_T = schedule.Alpha(T);
  // SNR_T / SNR_t; exactly 1 at t = T.
  const double ratio = t == T ? 1.0 : schedule.Snr(T) / schedule.Snr(t);
  BridgeCoefficients c;
  c.a = ratio * alpha_t / alpha_T;
  c.b = alpha_t * (1.0 - ratio);
  c.c = schedule.SigmaSquared(t) * (1.0 - ratio);
  return c;
}

BridgeMarginal ComputeBridgeMarginal(const NoiseSchedule& schedule,
                                     const Vector& a0, const Vector& aT,
                                     double t) {
  CheckSameSize(a0, aT, "bridge_marginal");
  const BridgeCoefficients k = ComputeBridgeCoefficients(schedule, t);
  BridgeMarginal m;
  m.mean = k.a * aT + k.b * a0;
  m.std = std::sqrt(std::max(k.c, 0.0));
  return m;
}

Vector SampleBridge(const NoiseSchedule& schedule, const Vector& a0,
                    const Vector& aT, double t, std::uint64_t seed) {
  BridgeMarginal m = ComputeBridgeMarginal(schedule, a0, aT, t);
  if (m.std == 0.0) return m.mean;
  Rng rng(seed);
  return m.mean + m.std * rng.NormalVector(a0.size());
}

double HTransformFactor(const NoiseSchedule& schedule, double t) {
  schedule.CheckTime(t);
  const double T = schedule.horizon();
  if (t >= T) throw SingularTimeError("h-transform is singular at t = T");
  const double denom =
      schedule.SigmaSquared(t) * (schedule.Snr(t) / schedule.Snr(T) - 1.0);
  if (!(denom > 0.0)) {
    throw SingularTimeError("h-transform denominator vanishes at t = " +
                            std::to_string(t));
  }
  return 1.0 / denom;
}

Vector HTransform(const NoiseSchedule& schedule, const Vector& a_t,
                  const Vector& aT, double t) {
  CheckSameSize(a_t, aT, "h_transform");
  const double k = HTransformFactor(schedule, t);
  const double ratio = schedule.Alpha(t) / schedule.Alpha(schedule.horizon());
  return k * (ratio * aT - a_t);
}

DataMoments MomentsFromConfig(const ScheduleConfig& config) {
  return DataMoments{config.sigma_data0, config.sigma_dataT, config.sigma_cov0T};
}

ScalingSet ComputeScaling(const NoiseSchedule& schedule, double t,
                          const DataMoments& m) {
  if (m.sigma0 < 0.0 || m.sigmaT < 0.0 || m.cov0T < 0.0) {
    throw DomainError("scaling: data moments must be non-negative");
  }
  const BridgeCoefficients k = ComputeBridgeCoefficients(schedule, t);
  const double s0 = m.sigma0 * m.sigma0;
  const double sT = m.sigmaT * m.sigmaT;
  const double denom =
      k.a * k.a * sT + k.b * k.b * s0 + 2.0 * k.a * k.b * m.cov0T + k.c;
  if (!(denom > 0.0)) throw DomainError("scaling: zero c_in denominator");
  ScalingSet s;
  s.moments = m;
  s.c_in = 1.0 / std::sqrt(denom);
  s.c_skip = (k.b * s0 + k.a * m.cov0T) * s.c_in * s.c_in;
  const double out2 = k.a * k.a * (sT * s0 - m.cov0T * m.cov0T) + s0 * k.c;
  s.c_out = std::sqrt(std::max(out2, 0.0)) * s.c_in;
  s.c_noise = 0.25 * std::log(t);
  s.weight = s.c_out > 0.0 ? 1.0 / (s.c_out * s.c_out) : 0.0;
  return s;
}

Vector Precondition(const Vector& raw_output, const Vector& a_t,
                    const ScalingSet& s) {
  CheckSameSize(raw_output, a_t, "precondition");
  return s.c_skip * a_t + s.c_out * raw_output;
}

Vector ScoreFromDenoiser(const NoiseSchedule& schedule, const Vector& a_t,
                         double t, const Vector& aT, const Vector& d_pred) {
  CheckSameSize(a_t, aT, "score_from_denoiser");
  CheckSameSize(a_t, d_pred, "score_from_denoiser");
  if (t >= schedule.horizon()) {
    throw SingularTimeError("score is singular at t = T");
  }
  const BridgeCoefficients k = ComputeBridgeCoefficients(schedule, t);
  if (!(k.c > 0.0)) throw SingularTimeError("zero bridge variance");
  return -(a_t - (k.a * aT + k.b * d_pred)) / k.c;
}

}  // namespace ddbm
