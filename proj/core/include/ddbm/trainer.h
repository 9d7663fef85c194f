// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_TRAINER_H_
#define DDBM_TRAINER_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ddbm/denoiser.h"
#include "ddbm/schedule.h"

namespace ddbm {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Cosine decay of lr to zero over the run.
  bool cosine_decay = false;
};

void to_json(nlohmann::json& j, const AdamConfig& c);
void from_json(const nlohmann::json& j, AdamConfig& c);

struct OptimizerState {
  Vector m;
  Vector v;
  std::int64_t step = 0;
  AdamConfig config;
};

OptimizerState MakeOptimizer(Eigen::Index n, const AdamConfig& config);

// Bias-corrected Adam update in place. lr_scale multiplies config.lr.
void AdamStep(OptimizerState& state, Vector& params, const Vector& grads,
              double lr_scale = 1.0);

// Multiplier for config.lr at `step` of `total` steps.
double LearningRateScale(const AdamConfig& config, std::int64_t step,
                         std::int64_t total);

struct LossWeights {
  double lambda_b = 1.0;
  double lambda_p = 1.0;
  double lambda_d = 0.1;
  double lambda_c = 1.0;
  double lambda_a = 1.0;
};

void to_json(nlohmann::json& j, const LossWeights& w);
// Rejects negative weights with ConfigError.
void from_json(const nlohmann::json& j, LossWeights& w);

// Expert actions (columns) with their contexts and, optionally, paired
// source samples.
struct BridgeDataset {
  Matrix actions;   // action_dim x N
  Matrix contexts;  // context_dim x N (context_dim may be 0)
  Matrix sources;   // action_dim x N when paired, else empty
  Eigen::Index size() const { return actions.cols(); }
};

// Draws aT for dataset item `index`.
using PriorPolicy = std::function<Vector(const BridgeDataset& data,
                                         Eigen::Index index,
                                         std::uint64_t seed)>;

PriorPolicy GaussianPriorPolicy();
// aT = dataset.sources(:, index); requires paired sources.
PriorPolicy PairedSourcePolicy();
// aT = a uniformly drawn column of `pool`, independent of the item.
PriorPolicy IndependentSourcePolicy(Matrix pool);

struct TrainingTuple {
  Vector a0;
  Vector aT;
  Vector a_t;
  Vector context;
  double t = 0.0;
};

TrainingTuple SampleTrainingTuple(const BridgeDataset& data,
                                  const PriorPolicy& prior,
                                  const NoiseSchedule& schedule,
                                  std::uint64_t seed, double eps = 1e-3);

struct TrainingBatch {
  Matrix a0;
  Matrix aT;
  Matrix a_t;
  Matrix context;
  Vector t;
};

TrainingBatch AssembleBatch(const std::vector<TrainingTuple>& tuples);

struct BridgeLossResult {
  double loss = 0.0;
  Vector grad_params;
  Matrix grad_context;
};

// Mean of w(t) ||a0 - D(a_t, t, aT, c)||^2 and its gradients. Throws
// DivergenceError when the loss is not finite.
BridgeLossResult BridgeLoss(const BridgeDenoiser& model, const Vector& params,
                            const TrainingBatch& batch);

struct TrainerConfig {
  int steps = 2000;
  int batch_size = 64;
  int log_every = 100;
  double eps = 1e-3;
  std::uint64_t seed = 0;
  bool two_stage = false;
  int prior_steps = 0;  // stage-one steps when two_stage
};

void to_json(nlohmann::json& j, const TrainerConfig& c);
void from_json(const nlohmann::json& j, TrainerConfig& c);

// One row per logging window: window means of each loss.
struct MetricsRow {
  int step = 0;
  double bridge = 0.0;
  double prior = 0.0;
  double temporal = 0.0;
  double total = 0.0;
};

std::string MetricsCsv(const std::vector<MetricsRow>& rows,
                       const std::string& config_hash);

// Accumulates per-step losses into MetricsRow windows.
class MetricsLog {
 public:
  explicit MetricsLog(int window) : window_(window > 0 ? window : 1) {}
  void Add(int step, double bridge, double prior, double temporal, double total);
  void Flush();
  const std::vector<MetricsRow>& rows() const { return rows_; }

 private:
  int window_;
  int count_ = 0;
  MetricsRow acc_;
  std::vector<MetricsRow> rows_;
};

struct TrainResult {
  Vector params;
  std::vector<MetricsRow> metrics;
};

// Single-network bridge training (toy tasks): lambda_p = lambda_d = 0.
TrainResult TrainBridge(const BridgeDenoiser& model, const BridgeDataset& data,
                        const PriorPolicy& prior, const TrainerConfig& trainer,
                        const AdamConfig& optimizer, const Vector& init_params);

struct ComponentLosses {
  double bridge = 0.0;
  double prior = 0.0;
  double temporal = 0.0;
};

// lambda_b L_b + lambda_p L_p + lambda_d L_d.
double CombineLosses(const ComponentLosses& losses, const LossWeights& weights);

}  // namespace ddbm

#endif  // DDBM_TRAINER_H_
