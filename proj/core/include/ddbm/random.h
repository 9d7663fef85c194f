// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_RANDOM_H_
#define DDBM_RANDOM_H_

#include <cstdint>
#include <random>

#include "ddbm/types.h"

namespace ddbm {

// Mixes a base seed with stream indices (SplitMix64 finaliser). Used to give
// every tuple, episode and step its own independent stream.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double Normal() { return normal_(engine_); }
  // Uniform on [lo, hi).
  double Uniform(double lo = 0.0, double hi = 1.0);
  // Uniform integer on [0, n).
  std::size_t Index(std::size_t n);
  Vector NormalVector(Eigen::Index n);
  Matrix NormalMatrix(Eigen::Index rows, Eigen::Index cols);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace ddbm

#endif  // DDBM_RANDOM_H_
