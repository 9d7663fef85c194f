// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/sampler.h"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ddbm/config.h"
#include "ddbm/csv.h"
#include "ddbm/random.h"

namespace ddbm {

GridPolicy ParseGridPolicy(const std::string& name) {
  if (name == "uniform") return GridPolicy::kUniform;
  if (name == "karras") return GridPolicy::kKarras;
  throw ConfigError("sampler.grid: expected uniform or karras, got '" + name + "'");
}

SampleMode ParseSampleMode(const std::string& name) {
  if (name == "ode" || name == "ODE") return SampleMode::kOde;
  if (name == "sde" || name == "SDE") return SampleMode::kSde;
  throw ConfigError("sampler.mode: expected ode or sde, got '" + name + "'");
}

std::string ToString(GridPolicy policy) {
  return policy == GridPolicy::kUniform ? "uniform" : "karras";
}

std::string ToString(SampleMode mode) {
  return mode == SampleMode::kOde ? "ode" : "sde";
}

void to_json(nlohmann::json& j, const SamplerOptions& o) {
  j = nlohmann::json{{"steps", o.steps},
                     {"mode", ToString(o.mode)},
                     {"grid", ToString(o.grid)},
                     {"rho", o.rho},
                     {"eps", o.eps},
                     {"euler_final_step", o.euler_final_step},
                     {"seed", o.seed}};
}

void from_json(const nlohmann::json& j, SamplerOptions& o) {
  o.steps = GetOr(j, "steps", o.steps, "sampler");
  o.mode = ParseSampleMode(GetOr<std::string>(j, "mode", ToString(o.mode), "sampler"));
  o.grid = ParseGridPolicy(GetOr<std::string>(j, "grid", ToString(o.grid), "sampler"));
  o.rho = GetOr(j, "rho", o.rho, "sampler");
  o.eps = GetOr(j, "eps", o.eps, "sampler");
  o.euler_final_step = GetOr(j, "euler_final_step", o.euler_final_step, "sampler");
  o.seed = GetOr(j, "seed", o.seed, "sampler");
  if (o.steps < 1) throw ConfigError("sampler.steps must be >= 1");
}

TimeGrid MakeTimeGrid(int k, double t_min, double T, double eps,
                      GridPolicy policy, double rho) {
  const double t_max = T - eps;
  if (k < 1) throw DomainError("time_grid: k must be >= 1");
  if (!(t_min > 0.0) || !(eps >= 0.0) || !(t_min < t_max)) {
    throw DomainError("time_grid: need 0 < t_min < T - eps");
  }
  if (policy == GridPolicy::kKarras && !(rho > 0.0)) {
    throw DomainError("time_grid: rho must be positive");
  }
  TimeGrid grid;
  grid.times.resize(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i <= k; ++i) {
    const double u = static_cast<double>(i) / k;
    double t;
    if (policy == GridPolicy::kUniform) {
      t = t_max + u * (t_min - t_max);
    } else {
      const double lo = std::pow(t_min, 1.0 / rho);
      const double hi = std::pow(t_max, 1.0 / rho);
      t = std::pow(hi + u * (lo - hi), rho);
    }
    grid.times[static_cast<std::size_t>(i)] = t;
  }
  grid.times.front() = t_max;
  grid.times.back() = t_min;
  return grid;
}

NetworkDenoiser::NetworkDenoiser(const BridgeDenoiser& model,
                                 const Vector& params, Matrix context)
    : model_(model), params_(params), context_(std::move(context)) {}

Matrix NetworkDenoiser::operator()(const Matrix& a_t, double t,
                                   const Matrix& aT) const {
  const Eigen::Index batch = a_t.cols();
  const Vector times = Vector::Constant(batch, t);
  if (context_.cols() == 1 && batch != 1) {
    const Matrix context = context_.replicate(1, batch);
    return model_.Denoise(params_, a_t, times, aT, context);
  }
  return model_.Denoise(params_, a_t, times, aT, context_);
}

Matrix EulerStep(const VectorField& field, const Matrix& state, double t_from,
                 double t_to) {
  return state + (t_to - t_from) * field(state, t_from);
}

Matrix HeunStep(const VectorField& field, const Matrix& state, double t_from,
                double t_to) {
  const double dt = t_to - t_from;
  const Matrix f0 = field(state, t_from);
  const Matrix predictor = state + dt * f0;
  const Matrix f1 = field(predictor, t_to);
  return state + 0.5 * dt * (f0 + f1);
}

namespace {

struct FieldParts {
  Matrix drift;  // f
  Matrix score;  // s
  Matrix h;      // h-transform
  double g2 = 0.0;
};

FieldParts EvaluateParts(const Matrix& state, double t,
                         const DenoiserFn& denoiser,
                         const NoiseSchedule& schedule, const Matrix& aT) {
  if (t >= schedule.horizon()) {
    throw SingularTimeError("reverse step evaluated at t = T");
  }
  const BridgeCoefficients k = ComputeBridgeCoefficients(schedule, t);
  const Matrix d = denoiser(state, t, aT);
  FieldParts p;
  p.score = -(state - (k.a * aT + k.b * d)) / k.c;
  const double alpha_ratio =
      schedule.Alpha(t) / schedule.Alpha(schedule.horizon());
  p.h = HTransformFactor(schedule, t) * (alpha_ratio * aT - state);
  const double dlog_alpha = schedule.DLogAlpha(t);
  p.drift = dlog_alpha * state;
  p.g2 = schedule.DSigmaSquared(t) - 2.0 * dlog_alpha * schedule.SigmaSquared(t);
  return p;
}

}  // namespace

Matrix ProbabilityFlowField(const Matrix& state, double t,
                            const DenoiserFn& denoiser,
                            const NoiseSchedule& schedule, const Matrix& aT) {
  const FieldParts p = EvaluateParts(state, t, denoiser, schedule, aT);
  return p.drift - p.g2 * (0.5 * p.score - p.h);
}

Matrix ReverseSdeDrift(const Matrix& state, double t,
                       const DenoiserFn& denoiser,
                       const NoiseSchedule& schedule, const Matrix& aT) {
  const FieldParts p = EvaluateParts(state, t, denoiser, schedule, aT);
  return p.drift - p.g2 * (p.score - p.h);
}

Matrix SdeStep(const Matrix& state, double t_from, double t_to,
               const DenoiserFn& denoiser, const NoiseSchedule& schedule,
               const Matrix& aT, std::uint64_t seed) {
  if (!(t_to < t_from)) throw DomainError("sde_step: need t_to < t_from");
  const FieldParts p = EvaluateParts(state, t_from, denoiser, schedule, aT);
  const double dt = t_to - t_from;
  Rng rng(seed);
  const Matrix noise = rng.NormalMatrix(state.rows(), state.cols());
  return state + dt * (p.drift - p.g2 * (p.score - p.h)) +
         std::sqrt(p.g2 * std::abs(dt)) * noise;
}

Matrix OdeStep(const Matrix& state, double t_from, double t_to,
               const DenoiserFn& denoiser, const NoiseSchedule& schedule,
               const Matrix& aT) {
  if (!(t_to < t_from)) throw DomainError("ode_step: need t_to < t_from");
  const VectorField field = [&](const Matrix& x, double t) {
    return ProbabilityFlowField(x, t, denoiser, schedule, aT);
  };
  return HeunStep(field, state, t_from, t_to);
}

SampleResult Sample(const DenoiserFn& denoiser, const NoiseSchedule& schedule,
                    const Matrix& aT, const SamplerOptions& options) {
  const TimeGrid grid =
      MakeTimeGrid(options.steps, schedule.t_min(), schedule.horizon(),
                   options.eps, options.grid, options.rho);
  const VectorField field = [&](const Matrix& x, double t) {
    return ProbabilityFlowField(x, t, denoiser, schedule, aT);
  };
  SampleResult result;
  result.times = grid.times;
  Matrix state = aT;
  if (options.keep_trace) result.trace.push_back(state);
  const int k = grid.steps();
  for (int i = 0; i < k; ++i) {
    const double t_from = grid.times[static_cast<std::size_t>(i)];
    const double t_to = grid.times[static_cast<std::size_t>(i) + 1];
    if (options.mode == SampleMode::kSde) {
      state = SdeStep(state, t_from, t_to, denoiser, schedule, aT,
                      DeriveSeed(options.seed, static_cast<std::uint64_t>(i)));
    } else if (options.euler_final_step && i == k - 1) {
      state = EulerStep(field, state, t_from, t_to);
    } else {
      state = HeunStep(field, state, t_from, t_to);
    }
    if (!state.allFinite()) {
      throw DivergenceError("sampler produced a non-finite state at step " +
                            std::to_string(i + 1) + " (t = " +
                            std::to_string(t_to) + ")");
    }
    if (options.keep_trace) result.trace.push_back(state);
  }
  result.final_state = std::move(state);
  return result;
}

std::string TraceCsv(const SampleResult& result, const std::string& config_hash) {
  CsvWriter csv({"step", "time", "sample", "waypoint", "x", "y", "config_hash"});
  for (std::size_t s = 0; s < result.trace.size(); ++s) {
    const Matrix& frame = result.trace[s];
    for (Eigen::Index j = 0; j < frame.cols(); ++j) {
      for (Eigen::Index w = 0; w + 1 < frame.rows(); w += 2) {
        csv.Row({std::to_string(s), FormatDouble(result.times[s]),
                 std::to_string(j), std::to_string(w / 2),
                 FormatDouble(frame(w, j)), FormatDouble(frame(w + 1, j)),
                 config_hash});
      }
    }
  }
  return csv.str();
}

}  // namespace ddbm
