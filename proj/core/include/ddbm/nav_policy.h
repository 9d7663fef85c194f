// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_NAV_POLICY_H_
#define DDBM_NAV_POLICY_H_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ddbm/joint.h"
#include "ddbm/navsim.h"
#include "ddbm/sampler.h"
#include "ddbm/schedule.h"

namespace ddbm {

// Dataset columns in the joint model's normalized action units.
JointBatch ToJointBatch(const NavDataset& data, double action_scale);

// Source-only policies execute the prior draw; bridge policies translate it
// with the sampler. Either way the output is in meters.
NavPolicy MakeLearnedNavPolicy(const JointModel& model, const Vector& params,
                               bool bridge, const SamplerOptions& sampler,
                               double range_cap = 4.0);

struct NavVariant {
  std::string name;
  const JointModel* model = nullptr;
  const Vector* params = nullptr;
  bool bridge = false;
};

struct NavEvalRow {
  std::string variant;
  std::string prior;
  std::string stage;  // "source" or "target"
  int episodes = 0;
  double success_rate = 0.0;
  double mean_collisions = 0.0;
  // Path length over successful episodes; zero when there are none.
  double mean_length = 0.0;
  double std_length = 0.0;
};

// Held-out layouts, disjoint from the training seeds of CollectExpertData.
std::vector<WorldLayout> EvaluationLayouts(int n, std::uint64_t seed,
                                           Difficulty difficulty,
                                           const WorldConfig& world = {});

// Every variant runs on the same layouts with the same episode seeds.
std::vector<NavEvalRow> EvaluateNav(const std::vector<NavVariant>& variants,
                                    const std::vector<WorldLayout>& layouts,
                                    const RolloutConfig& rollout,
                                    const SamplerOptions& sampler,
                                    std::uint64_t seed, int threads = 1);

// Header: variant,prior,stage,episodes,success_rate,mean_collisions,
// mean_length,std_length,config_hash
std::string NavEvalCsv(const std::vector<NavEvalRow>& rows,
                       const std::string& config_hash);

// Mean over contexts of the smallest per-draw MSE (meters^2) between prior
// samples and the expert action.
double PriorMinimalMse(const JointModel& model, const Vector& params,
                       const JointBatch& data, int contexts, int draws,
                       std::uint64_t seed);

struct NavExperimentConfig {
  CollectConfig collect;
  JointConfig model;
  ScheduleConfig schedule;
  TrainerConfig trainer;
  AdamConfig optimizer;
  LossWeights weights;
  SamplerOptions sampler;
  RolloutConfig rollout;
  std::vector<PriorKind> priors = {PriorKind::kGaussian, PriorKind::kRule,
                                   PriorKind::kLearned};
  int eval_layouts = 200;
  std::uint64_t seed = 0;
  int threads = 1;
};

void to_json(nlohmann::json& j, const NavExperimentConfig& c);
// Reads the nav-specific sections of a run config.
NavExperimentConfig NavExperimentConfigFromJson(const nlohmann::json& root);

struct TrainedNavModel {
  PriorKind prior = PriorKind::kGaussian;
  Vector params;
  std::vector<MetricsRow> metrics;
};

// Trains one joint model for `prior` on `data`.
TrainedNavModel TrainNavModel(const NavExperimentConfig& config,
                              PriorKind prior, const JointBatch& data);

JointModel MakeNavModel(const NavExperimentConfig& config, PriorKind prior);

struct NavExperimentResult {
  std::vector<TrainedNavModel> models;
  std::vector<NavEvalRow> rows;      // source then target per prior
  std::vector<double> prior_mse;     // per prior, PriorMinimalMse
  Eigen::Index dataset_size = 0;
};

// Collect data, train one model per prior and evaluate source-only and
// bridge-target variants on held-out layouts.
NavExperimentResult RunNavExperiment(const NavExperimentConfig& config);

}  // namespace ddbm

#endif  // DDBM_NAV_POLICY_H_
