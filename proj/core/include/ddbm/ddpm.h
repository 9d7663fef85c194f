// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_DDPM_H_
#define DDBM_DDPM_H_

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ddbm/film_mlp.h"
#include "ddbm/trainer.h"

namespace ddbm {

// Discrete noise-prediction baseline with a linear beta schedule.
struct DdpmConfig {
  int train_steps = 100;
  double beta_start = 1e-3;
  double beta_end = 0.2;
  // Box clip of the x0 estimate during sampling; <= 0 disables it.
  double clip = 0.0;
};

void to_json(nlohmann::json& j, const DdpmConfig& c);
void from_json(const nlohmann::json& j, DdpmConfig& c);

class DdpmSchedule {
 public:
  explicit DdpmSchedule(const DdpmConfig& config = {});

  const DdpmConfig& config() const { return config_; }
  int size() const { return config_.train_steps; }
  double beta(int i) const { return betas_[static_cast<std::size_t>(i)]; }
  double alpha_bar(int i) const { return alpha_bar_[static_cast<std::size_t>(i)]; }
  // Time feature fed to the network for timestep i: (i + 1) / N.
  double TimeFeature(int i) const;
  // k indices from N-1 down to 0, evenly strided; k = N gives every step.
  std::vector<int> StridedTimesteps(int k) const;

 private:
  DdpmConfig config_;
  std::vector<double> betas_;
  std::vector<double> alpha_bar_;
};

// Epsilon network for action_dim-dimensional data: input action_dim, time
// embedding, optional FiLM context.
NetworkSpec DdpmNetworkSpec(int action_dim, const std::vector<int>& hidden,
                            int context_dim, int time_embed_dim);

// Mean over the batch of ||eps_hat - eps||^2 with its parameter gradient.
struct DdpmLossResult {
  double loss = 0.0;
  Vector grad_params;
};

DdpmLossResult DdpmLoss(const FilmMlp& net, const Vector& params,
                        const DdpmSchedule& schedule, const Matrix& x0,
                        const Matrix& context, std::uint64_t seed);

TrainResult TrainDdpm(const FilmMlp& net, const DdpmSchedule& schedule,
                      const BridgeDataset& data, const TrainerConfig& trainer,
                      const AdamConfig& optimizer, const Vector& init_params);

// Ancestral sampling over k strided timesteps starting from N(0, I).
// context: context_dim x n, a single column, or empty. Returns dim x n.
Matrix DdpmSample(const FilmMlp& net, const Vector& params,
                  const DdpmSchedule& schedule, int k, std::uint64_t seed,
                  const Matrix& context, Eigen::Index n);

ActionSequence DdpmBaselineSample(const FilmMlp& net, const Vector& params,
                                  const DdpmSchedule& schedule, int k,
                                  std::uint64_t seed,
                                  const ContextVector& context);

}  // namespace ddbm

#endif  // DDBM_DDPM_H_
