// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_BRIDGE_H_
#define DDBM_BRIDGE_H_

#include <cstdint>

#include "ddbm/schedule.h"
#include "ddbm/types.h"

namespace ddbm {

struct DriftDiffusion {
  Vector drift;
  double g2 = 0.0;
};

DriftDiffusion ComputeDriftDiffusion(const NoiseSchedule& schedule,
                                     const Vector& a_t, double t);

// Scalars of the pinned Gaussian q(a_t | a0, aT):
//   mean = a * aT + b * a0, variance = c.
struct BridgeCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

BridgeCoefficients ComputeBridgeCoefficients(const NoiseSchedule& schedule,
                                             double t);

struct BridgeMarginal {
  Vector mean;
  double std = 0.0;
};

BridgeMarginal ComputeBridgeMarginal(const NoiseSchedule& schedule,
                                     const Vector& a0, const Vector& aT,
                                     double t);

Vector SampleBridge(const NoiseSchedule& schedule, const Vector& a0,
                    const Vector& aT, double t, std::uint64_t seed);

// Doob h-transform drift term; throws SingularTimeError at t = T.
Vector HTransform(const NoiseSchedule& schedule, const Vector& a_t,
                  const Vector& aT, double t);

// Scalar factor k(t) with HTransform = k(t) * (alpha_t/alpha_T aT - a_t).
double HTransformFactor(const NoiseSchedule& schedule, double t);

struct DataMoments {
  double sigma0 = 0.5;
  double sigmaT = 0.5;
  double cov0T = 0.0;
};

DataMoments MomentsFromConfig(const ScheduleConfig& config);

struct ScalingSet {
  double c_in = 0.0;
  double c_skip = 0.0;
  double c_out = 0.0;
  double c_noise = 0.0;
  // Loss weight 1 / c_out^2 (0 when c_out = 0).
  double weight = 0.0;
  DataMoments moments;
};

ScalingSet ComputeScaling(const NoiseSchedule& schedule, double t,
                          const DataMoments& moments);

// D = c_skip * a_t + c_out * raw.
Vector Precondition(const Vector& raw_output, const Vector& a_t,
                    const ScalingSet& s);

// Score of the bridge Gaussian with d_pred in place of a0:
//   s = -(a_t - mu_hat) / sigma_hat^2.
Vector ScoreFromDenoiser(const NoiseSchedule& schedule, const Vector& a_t,
                         double t, const Vector& aT, const Vector& d_pred);

}  // namespace ddbm

#endif  // DDBM_BRIDGE_H_
