// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_SAMPLER_H_
#define DDBM_SAMPLER_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ddbm/denoiser.h"
#include "ddbm/schedule.h"

namespace ddbm {

enum class GridPolicy { kUniform, kKarras };
enum class SampleMode { kSde, kOde };

GridPolicy ParseGridPolicy(const std::string& name);
SampleMode ParseSampleMode(const std::string& name);
std::string ToString(GridPolicy policy);
std::string ToString(SampleMode mode);

// Decreasing times t_k = T - eps > ... > t_0 = t_min stored head first, i.e.
// times[0] = T - eps and times[k] = t_min.
struct TimeGrid {
  std::vector<double> times;
  int steps() const { return static_cast<int>(times.size()) - 1; }
};

// Uniform spacing by default; kKarras spaces sigma^(1/rho) uniformly, which
// concentrates nodes near t_min.
TimeGrid MakeTimeGrid(int k, double t_min, double T, double eps,
                      GridPolicy policy = GridPolicy::kUniform,
                      double rho = 7.0);

// Batched denoiser evaluated at a single time: columns are samples.
class DenoiserFn {
 public:
  virtual ~DenoiserFn() = default;
  virtual Matrix operator()(const Matrix& a_t, double t,
                            const Matrix& aT) const = 0;
};

class NetworkDenoiser final : public DenoiserFn {
 public:
  // context: context_dim x B, or a single column broadcast to every sample.
  NetworkDenoiser(const BridgeDenoiser& model, const Vector& params,
                  Matrix context);
  Matrix operator()(const Matrix& a_t, double t,
                    const Matrix& aT) const override;

 private:
  const BridgeDenoiser& model_;
  const Vector& params_;
  Matrix context_;
};

// Returns the known clean endpoint a0 regardless of the state.
class OracleDenoiser final : public DenoiserFn {
 public:
  explicit OracleDenoiser(Matrix a0) : a0_(std::move(a0)) {}
  Matrix operator()(const Matrix&, double, const Matrix&) const override {
    return a0_;
  }

 private:
  Matrix a0_;
};

using VectorField = std::function<Matrix(const Matrix& state, double t)>;

Matrix EulerStep(const VectorField& field, const Matrix& state, double t_from,
                 double t_to);
Matrix HeunStep(const VectorField& field, const Matrix& state, double t_from,
                double t_to);

// da/dt = f - g^2 (s/2 - h).
Matrix ProbabilityFlowField(const Matrix& state, double t,
                            const DenoiserFn& denoiser,
                            const NoiseSchedule& schedule, const Matrix& aT);
// Drift of da = [f - g^2 (s - h)] dt + g dW.
Matrix ReverseSdeDrift(const Matrix& state, double t,
                       const DenoiserFn& denoiser,
                       const NoiseSchedule& schedule, const Matrix& aT);

Matrix SdeStep(const Matrix& state, double t_from, double t_to,
               const DenoiserFn& denoiser, const NoiseSchedule& schedule,
               const Matrix& aT, std::uint64_t seed);
Matrix OdeStep(const Matrix& state, double t_from, double t_to,
               const DenoiserFn& denoiser, const NoiseSchedule& schedule,
               const Matrix& aT);

struct SamplerOptions {
  int steps = 10;
  SampleMode mode = SampleMode::kOde;
  GridPolicy grid = GridPolicy::kKarras;
  double rho = 7.0;
  double eps = 1e-3;
  // ODE: replace the Heun correction of the last interval by an Euler step.
  bool euler_final_step = true;
  std::uint64_t seed = 0;
  bool keep_trace = true;
};

void to_json(nlohmann::json& j, const SamplerOptions& o);
void from_json(const nlohmann::json& j, SamplerOptions& o);

struct SampleResult {
  Matrix final_state;
  std::vector<Matrix> trace;  // k + 1 states when keep_trace
  std::vector<double> times;
};

// Throws DivergenceError naming the step when the state becomes non-finite.
SampleResult Sample(const DenoiserFn& denoiser, const NoiseSchedule& schedule,
                    const Matrix& aT, const SamplerOptions& options);

// Writes step,time,sample,waypoint,x,y rows for every trace frame.
std::string TraceCsv(const SampleResult& result, const std::string& config_hash);

}  // namespace ddbm

#endif  // DDBM_SAMPLER_H_
