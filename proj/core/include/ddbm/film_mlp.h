// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_FILM_MLP_H_
#define DDBM_FILM_MLP_H_

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ddbm/types.h"

namespace ddbm {

// Architecture of a tanh MLP whose hidden pre-activations are modulated by a
// context vector (FiLM) and whose input is extended by a sinusoidal embedding
// of a scalar time feature.
struct NetworkSpec {
  int input_dim = 16;
  std::vector<int> hidden = {64, 64, 64};
  int output_dim = 16;
  int context_dim = 0;     // 0 disables FiLM
  int time_embed_dim = 0;  // even; 0 disables the time embedding
  bool operator==(const NetworkSpec&) const = default;
};

void to_json(nlohmann::json& j, const NetworkSpec& s);
void from_json(const nlohmann::json& j, NetworkSpec& s);

// Throws ConfigError for zero widths or an odd embedding size.
void ValidateSpec(const NetworkSpec& spec);

// Analytic parameter count: per hidden layer W, b and (with context) the
// FiLM maps W_gamma, b_gamma, W_beta, b_beta; then the output layer.
Eigen::Index ParameterCount(const NetworkSpec& spec);

// [sin(3^j tau), cos(3^j tau)] for j < dim/2, one column per tau.
Matrix TimeEmbedding(const Vector& tau, int dim);

class FilmMlp {
 public:
  // Activations recorded by Forward for Backward.
  struct Tape {
    Matrix input;                   // network input incl. time embedding
    Matrix context;                 // context_dim x B
    std::vector<Matrix> pre;        // pre-FiLM pre-activation per layer
    std::vector<Matrix> gamma;      // FiLM scale per layer
    std::vector<Matrix> post;       // tanh output per layer
  };

  struct Gradients {
    Vector params;
    Matrix input;    // w.r.t. the caller's input (embedding rows excluded)
    Matrix context;  // empty when context_dim = 0
  };

  FilmMlp() : FilmMlp(NetworkSpec{}) {}
  explicit FilmMlp(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  Eigen::Index parameter_count() const { return count_; }

  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; FiLM maps zero so
  // that gamma = 1 and beta = 0 at initialisation.
  Vector Init(std::uint64_t seed) const;

  // input: input_dim x B; time: B entries (or empty when time_embed_dim = 0);
  // context: context_dim x B (or empty when context_dim = 0).
  Matrix Forward(const Vector& params, const Matrix& input, const Vector& time,
                 const Matrix& context, Tape* tape = nullptr) const;

  Gradients Backward(const Vector& params, const Tape& tape,
                     const Matrix& upstream) const;

 private:
  struct LayerOffsets {
    Eigen::Index w, b, wg, bg, wb, bb;
    int in, out;
  };

  NetworkSpec spec_;
  std::vector<LayerOffsets> layers_;  // hidden layers then the output layer
  Eigen::Index count_ = 0;
};

// Max relative error between analytic and central-difference parameter
// gradients of L = sum(upstream .* Forward) over `coords` random coordinates.
// eps must lie in [1e-7, 1e-3].
double FiniteDiffCheck(const FilmMlp& net, const Vector& params,
                       const Matrix& input, const Vector& time,
                       const Matrix& context, double eps, std::uint64_t seed,
                       int coords = 200);

}  // namespace ddbm

#endif  // DDBM_FILM_MLP_H_
