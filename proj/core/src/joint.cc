// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/joint.h"

#include <cmath>

#include <nlohmann/json.hpp>

#include "ddbm/bridge.h"
#include "ddbm/config.h"
#include "ddbm/random.h"

namespace ddbm {
namespace {

NetworkSpec EncoderSpec(const JointConfig& c) {
  NetworkSpec s;
  s.input_dim = c.obs_dim;
  s.hidden = c.encoder_hidden;
  s.output_dim = c.denoiser.context_dim;
  return s;
}

}  // namespace

PriorKind ParsePriorKind(const std::string& name) {
  if (name == "gaussian" || name == "Gaussian") return PriorKind::kGaussian;
  if (name == "rule" || name == "Rule") return PriorKind::kRule;
  if (name == "learned" || name == "Learned" || name == "cvae") {
    return PriorKind::kLearned;
  }
  throw ConfigError("unknown prior kind '" + name + "'");
}

std::string ToString(PriorKind kind) {
  switch (kind) {
    case PriorKind::kGaussian: return "gaussian";
    case PriorKind::kRule: return "rule";
    case PriorKind::kLearned: return "learned";
  }
  return "gaussian";
}

void to_json(nlohmann::json& j, const JointConfig& c) {
  j = nlohmann::json{{"obs_dim", c.obs_dim},
                     {"encoder_hidden", c.encoder_hidden},
                     {"denoiser", c.denoiser},
                     {"kind", ToString(c.prior)},
                     {"cvae", c.cvae},
                     {"parabolic", c.parabolic},
                     {"action_scale", c.action_scale},
                     {"temporal_scale", c.temporal_scale}};
}

void from_json(const nlohmann::json& j, JointConfig& c) {
  c.obs_dim = GetOr(j, "obs_dim", c.obs_dim, "model");
  c.encoder_hidden = GetOr(j, "encoder_hidden", c.encoder_hidden, "model");
  if (j.contains("denoiser")) c.denoiser = j.at("denoiser").get<DenoiserConfig>();
  c.prior = ParsePriorKind(GetOr<std::string>(j, "kind", ToString(c.prior), "prior"));
  if (j.contains("cvae")) c.cvae = j.at("cvae").get<CvaeConfig>();
  if (j.contains("parabolic")) c.parabolic = j.at("parabolic").get<ParabolicPriorConfig>();
  c.action_scale = GetOr(j, "action_scale", c.action_scale, "model");
  c.temporal_scale = GetOr(j, "temporal_scale", c.temporal_scale, "model");
  if (c.obs_dim <= 0) throw ConfigError("model.obs_dim must be positive");
  if (c.denoiser.context_dim <= 0) {
    throw ConfigError("denoiser.context_dim must be positive for the joint model");
  }
  if (c.denoiser.action_dim % 2 != 0) {
    throw ConfigError("denoiser.action_dim must be even (x, y waypoints)");
  }
  if (!(c.action_scale > 0.0)) throw ConfigError("model.action_scale must be positive");
}

JointBatch SelectColumns(const JointBatch& data,
                         const std::vector<Eigen::Index>& index) {
  const auto n = static_cast<Eigen::Index>(index.size());
  JointBatch b;
  b.observations.resize(data.observations.rows(), n);
  b.actions.resize(data.actions.rows(), n);
  b.decisions.resize(n);
  b.lengths.resize(n);
  b.steps.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index k = index[static_cast<std::size_t>(i)];
    b.observations.col(i) = data.observations.col(k);
    b.actions.col(i) = data.actions.col(k);
    b.decisions[i] = data.decisions[k];
    b.lengths[i] = data.lengths[k];
    b.steps[i] = data.steps[k];
  }
  return b;
}

JointModel::JointModel(const JointConfig& config, const NoiseSchedule& schedule)
    : config_(config),
      encoder_(EncoderSpec(config)),
      denoiser_(config.denoiser, schedule),
      rule_(config.denoiser.context_dim, config.denoiser.action_dim),
      cvae_(config.denoiser.context_dim, config.denoiser.action_dim, config.cvae),
      temporal_(config.denoiser.context_dim, config.temporal_scale) {
  enc_ = {0, encoder_.parameter_count()};
  den_ = {enc_.offset + enc_.size, denoiser_.parameter_count()};
  Eigen::Index prior_size = 0;
  if (config.prior == PriorKind::kRule) prior_size = rule_.parameter_count();
  if (config.prior == PriorKind::kLearned) prior_size = cvae_.parameter_count();
  prior_ = {den_.offset + den_.size, prior_size};
  temp_ = {prior_.offset + prior_.size, temporal_.parameter_count()};
  count_ = temp_.offset + temp_.size;
}

Vector JointModel::Init(std::uint64_t seed) const {
  Vector p(count_);
  p.segment(enc_.offset, enc_.size) = encoder_.Init(DeriveSeed(seed, 1));
  p.segment(den_.offset, den_.size) = denoiser_.net().Init(DeriveSeed(seed, 2));
  if (config_.prior == PriorKind::kRule) {
    p.segment(prior_.offset, prior_.size) = rule_.Init(DeriveSeed(seed, 3));
  } else if (config_.prior == PriorKind::kLearned) {
    p.segment(prior_.offset, prior_.size) = cvae_.Init(DeriveSeed(seed, 3));
  }
  p.segment(temp_.offset, temp_.size) = temporal_.Init(DeriveSeed(seed, 4));
  return p;
}

Matrix JointModel::Encode(const Vector& params, const Matrix& observations,
                          FilmMlp::Tape* tape) const {
  return encoder_.Forward(params.segment(enc_.offset, enc_.size), observations,
                          Vector(), Matrix(), tape);
}

Matrix JointModel::SamplePrior(const Vector& params, const Matrix& context,
                               std::uint64_t seed) const {
  const int dim = action_dim();
  const Eigen::Index n = context.cols();
  switch (config_.prior) {
    case PriorKind::kGaussian: {
      Rng rng(seed);
      return rng.NormalMatrix(dim, n);
    }
    case PriorKind::kRule: {
      const Vector p = params.segment(prior_.offset, prior_.size);
      const RuleHead::Batch out = rule_.Forward(p, context);
      Matrix aT(dim, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        aT.col(j) = SampleParabolicPrior(rule_.Output(out, j),
                                         DeriveSeed(seed, static_cast<std::uint64_t>(j)),
                                         dim / 2, config_.parabolic) /
                    config_.action_scale;
      }
      return aT;
    }
    case PriorKind::kLearned:
      return cvae_.Sample(params.segment(prior_.offset, prior_.size), context, seed);
  }
  return Matrix::Zero(dim, n);
}

TrainingBatch JointModel::MakeBridgeBatch(const Vector& params,
                                          const JointBatch& batch,
                                          std::uint64_t seed, double eps) const {
  TrainingBatch b;
  b.a0 = batch.actions;
  b.context = Encode(params, batch.observations);
  b.aT = SamplePrior(params, b.context, DeriveSeed(seed, 1));
  const Eigen::Index n = batch.size();
  const NoiseSchedule& schedule = denoiser_.schedule();
  Rng rng(DeriveSeed(seed, 2));
  b.t.resize(n);
  b.a_t.resize(b.a0.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b.t[i] = rng.Uniform(schedule.t_min(), schedule.horizon() - eps);
    b.a_t.col(i) = SampleBridge(schedule, b.a0.col(i), b.aT.col(i), b.t[i],
                                DeriveSeed(seed, 3, static_cast<std::uint64_t>(i)));
  }
  return b;
}

JointModel::LossResult JointModel::TotalLoss(const Vector& params,
                                             const JointBatch& batch,
                                             const LossWeights& weights,
                                             std::uint64_t seed, double eps,
                                             const SegmentMask& mask) const {
  if (params.size() != count_) throw ShapeError("total_loss: parameter size mismatch");
  if (batch.size() == 0) throw Error("total_loss: empty batch");
  LossResult r;
  r.grad = Vector::Zero(count_);

  FilmMlp::Tape enc_tape;
  const Matrix context = Encode(params, batch.observations, &enc_tape);
  Matrix grad_context = Matrix::Zero(context.rows(), context.cols());

  TrainingBatch bridge;
  bridge.a0 = batch.actions;
  bridge.context = context;
  {
    const TrainingBatch b = MakeBridgeBatch(params, batch, seed, eps);
    bridge.aT = b.aT;
    bridge.a_t = b.a_t;
    bridge.t = b.t;
  }
  const BridgeLossResult lb =
      BridgeLoss(denoiser_, params.segment(den_.offset, den_.size), bridge);
  r.parts.bridge = lb.loss;
  if (mask.denoiser) {
    r.grad.segment(den_.offset, den_.size) = weights.lambda_b * lb.grad_params;
  }
  grad_context += weights.lambda_b * lb.grad_context;

  if (config_.prior == PriorKind::kRule) {
    const Vector p = params.segment(prior_.offset, prior_.size);
    const RuleHead::Batch out = rule_.Forward(p, context);
    const RuleHead::LossResult lp =
        rule_.Loss(p, out, batch.decisions, batch.actions, batch.lengths,
                   weights.lambda_c, weights.lambda_a);
    r.parts.prior = lp.loss;
    if (mask.prior) r.grad.segment(prior_.offset, prior_.size) = weights.lambda_p * lp.grad_params;
    grad_context += weights.lambda_p * lp.grad_context;
  } else if (config_.prior == PriorKind::kLearned) {
    const Vector p = params.segment(prior_.offset, prior_.size);
    const Cvae::LossResult lp = cvae_.Loss(p, context, batch.actions, DeriveSeed(seed, 4));
    r.parts.prior = lp.loss;
    if (mask.prior) r.grad.segment(prior_.offset, prior_.size) = weights.lambda_p * lp.grad_params;
    grad_context += weights.lambda_p * lp.grad_context;
  }

  const TemporalHead::LossResult ld =
      temporal_.Loss(params.segment(temp_.offset, temp_.size), context, batch.steps);
  r.parts.temporal = ld.loss;
  if (mask.temporal) {
    r.grad.segment(temp_.offset, temp_.size) = weights.lambda_d * ld.grad_params;
  }
  grad_context += weights.lambda_d * ld.grad_context;

  r.total = CombineLosses(r.parts, weights);
  if (!std::isfinite(r.total)) throw DivergenceError("total_loss: non-finite loss");
  if (mask.encoder) {
    const FilmMlp::Gradients ge = encoder_.Backward(
        params.segment(enc_.offset, enc_.size), enc_tape, grad_context);
    r.grad.segment(enc_.offset, enc_.size) = ge.params;
  }
  return r;
}

JointTrainResult TrainJoint(const JointModel& model, const JointBatch& data,
                            const TrainerConfig& trainer,
                            const AdamConfig& optimizer,
                            const LossWeights& weights,
                            const Vector& init_params) {
  if (init_params.size() != model.parameter_count()) {
    throw ShapeError("train: initial parameters do not match the architecture");
  }
  if (data.size() == 0) throw Error("train: empty dataset");
  JointTrainResult result;
  result.params = init_params;
  MetricsLog log(trainer.log_every);
  const int stage_one = trainer.two_stage ? trainer.prior_steps : 0;
  const int total = stage_one + trainer.steps;
  OptimizerState opt = MakeOptimizer(init_params.size(), optimizer);
  std::vector<Eigen::Index> index(static_cast<std::size_t>(trainer.batch_size));
  for (int step = 0; step < total; ++step) {
    const bool first = step < stage_one;
    if (trainer.two_stage && step == stage_one) {
      opt = MakeOptimizer(init_params.size(), optimizer);
    }
    LossWeights w = weights;
    SegmentMask mask;
    if (first) {
      w.lambda_b = 0.0;
      mask.denoiser = false;
    } else if (trainer.two_stage) {
      mask.encoder = mask.prior = mask.temporal = false;
    }
    const auto s = static_cast<std::uint64_t>(step);
    Rng rng(DeriveSeed(trainer.seed, s));
    for (Eigen::Index& k : index) {
      k = static_cast<Eigen::Index>(rng.Index(static_cast<std::size_t>(data.size())));
    }
    JointModel::LossResult loss;
    try {
      loss = model.TotalLoss(result.params, SelectColumns(data, index), w,
                             DeriveSeed(trainer.seed, s, 1), trainer.eps, mask);
    } catch (const DivergenceError&) {
      throw DivergenceError("training diverged at step " + std::to_string(step) +
                            ": non-finite loss");
    }
    const int stage_step = first ? step : step - stage_one;
    const int stage_total = first ? stage_one : trainer.steps;
    AdamStep(opt, result.params, loss.grad,
             LearningRateScale(optimizer, stage_step, stage_total));
    log.Add(step + 1, loss.parts.bridge, loss.parts.prior, loss.parts.temporal,
            loss.total);
  }
  log.Flush();
  result.metrics = log.rows();
  return result;
}

}  // namespace ddbm
