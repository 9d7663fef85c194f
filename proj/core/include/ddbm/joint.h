// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_JOINT_H_
#define DDBM_JOINT_H_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ddbm/denoiser.h"
#include "ddbm/film_mlp.h"
#include "ddbm/priors.h"
#include "ddbm/trainer.h"

namespace ddbm {

enum class PriorKind { kGaussian, kRule, kLearned };

PriorKind ParsePriorKind(const std::string& name);
std::string ToString(PriorKind kind);

// Observation encoder, bridge denoiser, prior head and temporal head sharing
// one flat parameter vector. Actions are handled in normalized units
// (meters / action_scale).
struct JointConfig {
  int obs_dim = 24;
  std::vector<int> encoder_hidden = {64};
  DenoiserConfig denoiser;
  PriorKind prior = PriorKind::kGaussian;
  CvaeConfig cvae;
  ParabolicPriorConfig parabolic;
  double action_scale = 2.0;
  double temporal_scale = 10.0;
};

void to_json(nlohmann::json& j, const JointConfig& c);
void from_json(const nlohmann::json& j, JointConfig& c);

struct JointBatch {
  Matrix observations;        // obs_dim x B
  Matrix actions;             // action_dim x B, normalized
  Eigen::VectorXi decisions;  // heading class per column
  Vector lengths;             // endpoint distance, meters
  Vector steps;               // remaining steps to the goal
  Eigen::Index size() const { return actions.cols(); }
};

// Columns `index` of `data`.
JointBatch SelectColumns(const JointBatch& data,
                         const std::vector<Eigen::Index>& index);

// Which parameter segments receive gradients.
struct SegmentMask {
  bool encoder = true;
  bool denoiser = true;
  bool prior = true;
  bool temporal = true;
};

class JointModel {
 public:
  struct Segment {
    Eigen::Index offset = 0;
    Eigen::Index size = 0;
  };

  JointModel(const JointConfig& config, const NoiseSchedule& schedule);

  const JointConfig& config() const { return config_; }
  const BridgeDenoiser& denoiser() const { return denoiser_; }
  const FilmMlp& encoder() const { return encoder_; }
  const RuleHead& rule_head() const { return rule_; }
  const Cvae& cvae() const { return cvae_; }
  const TemporalHead& temporal() const { return temporal_; }
  int action_dim() const { return config_.denoiser.action_dim; }

  Segment encoder_segment() const { return enc_; }
  Segment denoiser_segment() const { return den_; }
  Segment prior_segment() const { return prior_; }
  Segment temporal_segment() const { return temp_; }
  Eigen::Index parameter_count() const { return count_; }

  Vector Init(std::uint64_t seed) const;

  Matrix Encode(const Vector& params, const Matrix& observations,
                FilmMlp::Tape* tape = nullptr) const;

  // One aT per context column, normalized units. Treated as a constant by
  // the loss.
  Matrix SamplePrior(const Vector& params, const Matrix& context,
                     std::uint64_t seed) const;

  // Bridge tuples for the batch: encoded contexts, prior draws, uniform
  // times on [t_min, T - eps] and bridge samples.
  TrainingBatch MakeBridgeBatch(const Vector& params, const JointBatch& batch,
                                std::uint64_t seed, double eps) const;

  struct LossResult {
    ComponentLosses parts;
    double total = 0.0;
    Vector grad;
  };

  // lambda_b L_b + lambda_p L_p + lambda_d L_d with gradients for every
  // segment enabled in `mask`. Context gradients from all heads flow into
  // the encoder.
  LossResult TotalLoss(const Vector& params, const JointBatch& batch,
                       const LossWeights& weights, std::uint64_t seed,
                       double eps = 1e-3, const SegmentMask& mask = {}) const;

 private:
  JointConfig config_;
  FilmMlp encoder_;
  BridgeDenoiser denoiser_;
  RuleHead rule_;
  Cvae cvae_;
  TemporalHead temporal_;
  Segment enc_, den_, prior_, temp_;
  Eigen::Index count_ = 0;
};

struct JointTrainResult {
  Vector params;
  std::vector<MetricsRow> metrics;
};

// Joint training under the total loss. With trainer.two_stage the encoder
// and heads are trained first for trainer.prior_steps with lambda_b = 0,
// then only the denoiser for trainer.steps.
JointTrainResult TrainJoint(const JointModel& model, const JointBatch& data,
                            const TrainerConfig& trainer,
                            const AdamConfig& optimizer,
                            const LossWeights& weights,
                            const Vector& init_params);

}  // namespace ddbm

#endif  // DDBM_JOINT_H_
