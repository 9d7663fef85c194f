// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/ddpm.h"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ddbm/config.h"
#include "ddbm/random.h"

namespace ddbm {

void to_json(nlohmann::json& j, const DdpmConfig& c) {
  j = nlohmann::json{{"train_steps", c.train_steps}, {"beta_start", c.beta_start},
                     {"beta_end", c.beta_end}, {"clip", c.clip}};
}

void from_json(const nlohmann::json& j, DdpmConfig& c) {
  c.train_steps = GetOr(j, "train_steps", c.train_steps, "ddpm");
  c.beta_start = GetOr(j, "beta_start", c.beta_start, "ddpm");
  c.beta_end = GetOr(j, "beta_end", c.beta_end, "ddpm");
  c.clip = GetOr(j, "clip", c.clip, "ddpm");
}

DdpmSchedule::DdpmSchedule(const DdpmConfig& config) : config_(config) {
  const int n = config.train_steps;
  if (n < 1) throw ConfigError("ddpm.train_steps must be >= 1");
  if (!(config.beta_start > 0.0) || !(config.beta_end >= config.beta_start) ||
      !(config.beta_end < 1.0)) {
    throw ConfigError("ddpm: need 0 < beta_start <= beta_end < 1");
  }
  betas_.resize(static_cast<std::size_t>(n));
  alpha_bar_.resize(static_cast<std::size_t>(n));
  double prod = 1.0;
  for (int i = 0; i < n; ++i) {
    const double u = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    const double beta = config.beta_start + u * (config.beta_end - config.beta_start);
    prod *= 1.0 - beta;
    betas_[static_cast<std::size_t>(i)] = beta;
    alpha_bar_[static_cast<std::size_t>(i)] = prod;
  }
}

double DdpmSchedule::TimeFeature(int i) const {
  return static_cast<double>(i + 1) / config_.train_steps;
}

std::vector<int> DdpmSchedule::StridedTimesteps(int k) const {
  const int n = config_.train_steps;
  if (k < 1) throw DomainError("ddpm: k must be >= 1");
  std::vector<int> steps;
  if (k == 1) return {n - 1};
  for (int j = 0; j < k; ++j) {
    const double pos = (n - 1) * (1.0 - static_cast<double>(j) / (k - 1));
    const int idx = static_cast<int>(std::lround(pos));
    if (steps.empty() || steps.back() != idx) steps.push_back(idx);
  }
  return steps;
}

NetworkSpec DdpmNetworkSpec(int action_dim, const std::vector<int>& hidden,
                            int context_dim, int time_embed_dim) {
  NetworkSpec s;
  s.input_dim = action_dim;
  s.hidden = hidden;
  s.output_dim = action_dim;
  s.context_dim = context_dim;
  s.time_embed_dim = time_embed_dim;
  return s;
}

DdpmLossResult DdpmLoss(const FilmMlp& net, const Vector& params,
                        const DdpmSchedule& schedule, const Matrix& x0,
                        const Matrix& context, std::uint64_t seed) {
  const Eigen::Index n = x0.cols();
  Rng rng(seed);
  Matrix xt(x0.rows(), n);
  Matrix noise(x0.rows(), n);
  Vector tau(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int i = static_cast<int>(rng.Index(static_cast<std::size_t>(schedule.size())));
    const double ab = schedule.alpha_bar(i);
    noise.col(j) = rng.NormalVector(x0.rows());
    xt.col(j) = std::sqrt(ab) * x0.col(j) + std::sqrt(1.0 - ab) * noise.col(j);
    tau[j] = schedule.TimeFeature(i);
  }
  FilmMlp::Tape tape;
  const Matrix pred = net.Forward(params, xt, tau, context, &tape);
  const Matrix diff = pred - noise;
  DdpmLossResult r;
  r.loss = diff.squaredNorm() / static_cast<double>(n);
  if (!std::isfinite(r.loss)) throw DivergenceError("ddpm loss is not finite");
  r.grad_params =
      net.Backward(params, tape, (2.0 / static_cast<double>(n)) * diff).params;
  return r;
}

TrainResult TrainDdpm(const FilmMlp& net, const DdpmSchedule& schedule,
                      const BridgeDataset& data, const TrainerConfig& trainer,
                      const AdamConfig& optimizer, const Vector& init_params) {
  if (data.size() == 0) throw Error("ddpm: empty dataset");
  TrainResult result;
  result.params = init_params;
  OptimizerState opt = MakeOptimizer(init_params.size(), optimizer);
  MetricsLog log(trainer.log_every);
  const bool has_context = data.contexts.rows() > 0;
  Matrix x0(data.actions.rows(), trainer.batch_size);
  Matrix ctx(data.contexts.rows(), has_context ? trainer.batch_size : 0);
  for (int step = 0; step < trainer.steps; ++step) {
    Rng rng(DeriveSeed(trainer.seed, static_cast<std::uint64_t>(step)));
    for (int j = 0; j < trainer.batch_size; ++j) {
      const auto idx = static_cast<Eigen::Index>(
          rng.Index(static_cast<std::size_t>(data.size())));
      x0.col(j) = data.actions.col(idx);
      if (has_context) ctx.col(j) = data.contexts.col(idx);
    }
    const DdpmLossResult loss = DdpmLoss(
        net, result.params, schedule, x0, ctx,
        DeriveSeed(trainer.seed, static_cast<std::uint64_t>(step), 1));
    AdamStep(opt, result.params, loss.grad_params,
             LearningRateScale(optimizer, step, trainer.steps));
    log.Add(step + 1, loss.loss, 0.0, 0.0, loss.loss);
  }
  log.Flush();
  result.metrics = log.rows();
  return result;
}

Matrix DdpmSample(const FilmMlp& net, const Vector& params,
                  const DdpmSchedule& schedule, int k, std::uint64_t seed,
                  const Matrix& context, Eigen::Index n) {
  const int dim = net.spec().input_dim;
  Matrix ctx = context;
  if (net.spec().context_dim > 0 && ctx.cols() == 1 && n != 1) {
    ctx = context.replicate(1, n);
  }
  Rng rng(seed);
  Matrix x = rng.NormalMatrix(dim, n);
  const std::vector<int> steps = schedule.StridedTimesteps(k);
  const double clip = schedule.config().clip;
  for (std::size_t j = 0; j < steps.size(); ++j) {
    const int i = steps[j];
    const double ab = schedule.alpha_bar(i);
    const double ab_prev = j + 1 < steps.size() ? schedule.alpha_bar(steps[j + 1]) : 1.0;
    const Matrix eps =
        net.Forward(params, x, Vector::Constant(n, schedule.TimeFeature(i)), ctx);
    Matrix x0 = (x - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
    if (clip > 0.0) x0 = x0.cwiseMax(-clip).cwiseMin(clip);
    // Respaced beta between consecutive retained timesteps.
    const double beta = 1.0 - ab / ab_prev;
    const Matrix mean = (std::sqrt(ab_prev) * beta / (1.0 - ab)) * x0 +
                        (std::sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab)) * x;
    if (j + 1 < steps.size()) {
      const double var = beta * (1.0 - ab_prev) / (1.0 - ab);
      x = mean + std::sqrt(var) * rng.NormalMatrix(dim, n);
    } else {
      x = mean;
    }
    if (!x.allFinite()) {
      throw DivergenceError("ddpm sampler produced a non-finite state at step " +
                            std::to_string(j + 1));
    }
  }
  return x;
}

ActionSequence DdpmBaselineSample(const FilmMlp& net, const Vector& params,
                                  const DdpmSchedule& schedule, int k,
                                  std::uint64_t seed,
                                  const ContextVector& context) {
  return DdpmSample(net, params, schedule, k, seed, context, 1).col(0);
}

}  // namespace ddbm
