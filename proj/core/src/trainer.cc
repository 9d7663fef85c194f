// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/trainer.h"

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "ddbm/bridge.h"
#include "ddbm/config.h"
#include "ddbm/csv.h"
#include "ddbm/random.h"

namespace ddbm {

void to_json(nlohmann::json& j, const AdamConfig& c) {
  j = nlohmann::json{{"lr", c.lr}, {"beta1", c.beta1}, {"beta2", c.beta2},
                     {"eps", c.eps}, {"cosine_decay", c.cosine_decay}};
}

void from_json(const nlohmann::json& j, AdamConfig& c) {
  c.lr = GetOr(j, "lr", c.lr, "optimizer");
  c.beta1 = GetOr(j, "beta1", c.beta1, "optimizer");
  c.beta2 = GetOr(j, "beta2", c.beta2, "optimizer");
  c.eps = GetOr(j, "eps", c.eps, "optimizer");
  c.cosine_decay = GetOr(j, "cosine_decay", c.cosine_decay, "optimizer");
  if (c.lr < 0.0) throw ConfigError("optimizer.lr must be >= 0");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0)) {
    throw ConfigError("optimizer: betas must lie in [0, 1)");
  }
  if (!(c.eps > 0.0)) throw ConfigError("optimizer.eps must be positive");
}

OptimizerState MakeOptimizer(Eigen::Index n, const AdamConfig& config) {
  OptimizerState s;
  s.m = Vector::Zero(n);
  s.v = Vector::Zero(n);
  s.config = config;
  return s;
}

void AdamStep(OptimizerState& s, Vector& params, const Vector& grads,
              double lr_scale) {
  if (params.size() != grads.size() || s.m.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and moment sizes differ");
  }
  const AdamConfig& c = s.config;
  ++s.step;
  s.m = c.beta1 * s.m + (1.0 - c.beta1) * grads;
  s.v = c.beta2 * s.v + (1.0 - c.beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
  const double lr = c.lr * lr_scale;
  params.array() -=
      lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + c.eps);
}

double LearningRateScale(const AdamConfig& config, std::int64_t step,
                         std::int64_t total) {
  if (!config.cosine_decay || total <= 0) return 1.0;
  const double u = static_cast<double>(step) / static_cast<double>(total);
  return 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{{"lambda_b", w.lambda_b}, {"lambda_p", w.lambda_p},
                     {"lambda_d", w.lambda_d}, {"lambda_c", w.lambda_c},
                     {"lambda_a", w.lambda_a}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  const char* s = "loss_weights";
  w.lambda_b = GetOr(j, "lambda_b", w.lambda_b, s);
  w.lambda_p = GetOr(j, "lambda_p", w.lambda_p, s);
  w.lambda_d = GetOr(j, "lambda_d", w.lambda_d, s);
  w.lambda_c = GetOr(j, "lambda_c", w.lambda_c, s);
  w.lambda_a = GetOr(j, "lambda_a", w.lambda_a, s);
  const std::pair<const char*, double> all[] = {
      {"lambda_b", w.lambda_b}, {"lambda_p", w.lambda_p},
      {"lambda_d", w.lambda_d}, {"lambda_c", w.lambda_c},
      {"lambda_a", w.lambda_a}};
  for (const auto& [name, value] : all) {
    if (!(value >= 0.0)) {
      throw ConfigError(std::string("loss_weights.") + name + " must be >= 0");
    }
  }
}

PriorPolicy GaussianPriorPolicy() {
  return [](const BridgeDataset& data, Eigen::Index, std::uint64_t seed) {
    Rng rng(seed);
    return Vector(rng.NormalVector(data.actions.rows()));
  };
}

PriorPolicy PairedSourcePolicy() {
  return [](const BridgeDataset& data, Eigen::Index index, std::uint64_t) {
    if (data.sources.cols() != data.actions.cols()) {
      throw ConfigError("paired prior requires one source per dataset item");
    }
    return Vector(data.sources.col(index));
  };
}

PriorPolicy IndependentSourcePolicy(Matrix pool) {
  if (pool.cols() == 0) throw ConfigError("independent prior: empty source pool");
  return [pool = std::move(pool)](const BridgeDataset&, Eigen::Index,
                                  std::uint64_t seed) {
    Rng rng(seed);
    return Vector(pool.col(static_cast<Eigen::Index>(
        rng.Index(static_cast<std::size_t>(pool.cols())))));
  };
}

TrainingTuple SampleTrainingTuple(const BridgeDataset& data,
                                  const PriorPolicy& prior,
                                  const NoiseSchedule& schedule,
                                  std::uint64_t seed, double eps) {
  if (data.size() == 0) throw Error("sample_training_tuple: empty dataset");
  Rng rng(seed);
  const auto index = static_cast<Eigen::Index>(
      rng.Index(static_cast<std::size_t>(data.size())));
  TrainingTuple tuple;
  tuple.a0 = data.actions.col(index);
  if (data.contexts.rows() > 0) tuple.context = data.contexts.col(index);
  tuple.aT = prior(data, index, DeriveSeed(seed, 1));
  CheckSameSize(tuple.a0, tuple.aT, "training tuple");
  tuple.t = rng.Uniform(schedule.t_min(), schedule.horizon() - eps);
  tuple.a_t = SampleBridge(schedule, tuple.a0, tuple.aT, tuple.t,
                           DeriveSeed(seed, 2));
  return tuple;
}

TrainingBatch AssembleBatch(const std::vector<TrainingTuple>& tuples) {
  if (tuples.empty()) throw Error("empty batch");
  const auto n = static_cast<Eigen::Index>(tuples.size());
  const Eigen::Index d = tuples.front().a0.size();
  const Eigen::Index c = tuples.front().context.size();
  TrainingBatch b;
  b.a0.resize(d, n);
  b.aT.resize(d, n);
  b.a_t.resize(d, n);
  b.context.resize(c, n);
  b.t.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const TrainingTuple& tu = tuples[static_cast<std::size_t>(j)];
    b.a0.col(j) = tu.a0;
    b.aT.col(j) = tu.aT;
    b.a_t.col(j) = tu.a_t;
    if (c > 0) b.context.col(j) = tu.context;
    b.t[j] = tu.t;
  }
  return b;
}

BridgeLossResult BridgeLoss(const BridgeDenoiser& model, const Vector& params,
                            const TrainingBatch& batch) {
  const Eigen::Index n = batch.a0.cols();
  if (n == 0) throw Error("bridge_loss: empty batch");
  BridgeDenoiser::Tape tape;
  const Matrix d =
      model.Denoise(params, batch.a_t, batch.t, batch.aT, batch.context, &tape);
  Vector w(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    w[j] = ComputeScaling(model.schedule(), batch.t[j], model.moments()).weight;
  }
  const Matrix residual = batch.a0 - d;
  BridgeLossResult r;
  r.loss = (residual.colwise().squaredNorm().transpose().array() * w.array()).sum() /
           static_cast<double>(n);
  if (!std::isfinite(r.loss)) {
    throw DivergenceError("bridge loss is not finite");
  }
  const Matrix upstream = residual * (-2.0 / static_cast<double>(n) * w).asDiagonal();
  FilmMlp::Gradients g = model.Backward(params, tape, upstream);
  r.grad_params = std::move(g.params);
  r.grad_context = std::move(g.context);
  return r;
}

void to_json(nlohmann::json& j, const TrainerConfig& c) {
  j = nlohmann::json{{"steps", c.steps},       {"batch_size", c.batch_size},
                     {"log_every", c.log_every}, {"eps", c.eps},
                     {"seed", c.seed},         {"two_stage", c.two_stage},
                     {"prior_steps", c.prior_steps}};
}

void from_json(const nlohmann::json& j, TrainerConfig& c) {
  c.steps = GetOr(j, "steps", c.steps, "trainer");
  c.batch_size = GetOr(j, "batch_size", c.batch_size, "trainer");
  c.log_every = GetOr(j, "log_every", c.log_every, "trainer");
  c.eps = GetOr(j, "eps", c.eps, "trainer");
  c.seed = GetOr(j, "seed", c.seed, "trainer");
  c.two_stage = GetOr(j, "two_stage", c.two_stage, "trainer");
  c.prior_steps = GetOr(j, "prior_steps", c.prior_steps, "trainer");
  if (c.steps < 0 || c.batch_size < 1 || c.log_every < 1 || c.prior_steps < 0) {
    throw ConfigError("trainer: steps >= 0, batch_size >= 1, log_every >= 1");
  }
  if (!(c.eps > 0.0)) throw ConfigError("trainer.eps must be positive");
}

std::string MetricsCsv(const std::vector<MetricsRow>& rows,
                       const std::string& config_hash) {
  CsvWriter csv({"step", "L_b", "L_p", "L_d", "total", "config_hash"});
  for (const MetricsRow& r : rows) {
    csv.Row({std::to_string(r.step), FormatDouble(r.bridge),
             FormatDouble(r.prior), FormatDouble(r.temporal),
             FormatDouble(r.total), config_hash});
  }
  return csv.str();
}

void MetricsLog::Add(int step, double bridge, double prior, double temporal,
                     double total) {
  acc_.step = step;
  acc_.bridge += bridge;
  acc_.prior += prior;
  acc_.temporal += temporal;
  acc_.total += total;
  if (++count_ == window_) Flush();
}

void MetricsLog::Flush() {
  if (count_ == 0) return;
  const double inv = 1.0 / count_;
  MetricsRow r = acc_;
  r.bridge *= inv;
  r.prior *= inv;
  r.temporal *= inv;
  r.total *= inv;
  rows_.push_back(r);
  acc_ = MetricsRow{};
  count_ = 0;
}

TrainResult TrainBridge(const BridgeDenoiser& model, const BridgeDataset& data,
                        const PriorPolicy& prior, const TrainerConfig& trainer,
                        const AdamConfig& optimizer, const Vector& init_params) {
  if (init_params.size() != model.parameter_count()) {
    throw ShapeError("train: initial parameters do not match the architecture");
  }
  TrainResult result;
  result.params = init_params;
  OptimizerState opt = MakeOptimizer(init_params.size(), optimizer);
  MetricsLog log(trainer.log_every);
  std::vector<TrainingTuple> tuples(static_cast<std::size_t>(trainer.batch_size));
  for (int step = 0; step < trainer.steps; ++step) {
    for (int i = 0; i < trainer.batch_size; ++i) {
      tuples[static_cast<std::size_t>(i)] = SampleTrainingTuple(
          data, prior, model.schedule(),
          DeriveSeed(trainer.seed, static_cast<std::uint64_t>(step),
                     static_cast<std::uint64_t>(i)),
          trainer.eps);
    }
    const TrainingBatch batch = AssembleBatch(tuples);
    BridgeLossResult loss;
    try {
      loss = BridgeLoss(model, result.params, batch);
    } catch (const DivergenceError&) {
      throw DivergenceError("training diverged at step " + std::to_string(step) +
                            ": non-finite bridge loss");
    }
    AdamStep(opt, result.params, loss.grad_params,
             LearningRateScale(optimizer, step, trainer.steps));
    log.Add(step + 1, loss.loss, 0.0, 0.0, loss.loss);
  }
  log.Flush();
  result.metrics = log.rows();
  return result;
}

double CombineLosses(const ComponentLosses& losses, const LossWeights& weights) {
  return weights.lambda_b * losses.bridge + weights.lambda_p * losses.prior +
         weights.lambda_d * losses.temporal;
}

}  // namespace ddbm
