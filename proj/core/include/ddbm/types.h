// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_TYPES_H_
#define DDBM_TYPES_H_

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace ddbm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Flat waypoint vector (x0, y0, x1, y1, ...) in the robot frame.
using ActionSequence = Eigen::VectorXd;
using ContextVector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or missing configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Argument outside an operation's domain (time range, probabilities, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Evaluation at t = T where the h-transform and score are singular.
class SingularTimeError : public DomainError {
 public:
  using DomainError::DomainError;
};

class DegenerateGeometryError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Non-finite loss or state during training or sampling.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

void CheckSameSize(const Vector& a, const Vector& b, const char* what);

}  // namespace ddbm

#endif  // DDBM_TYPES_H_
