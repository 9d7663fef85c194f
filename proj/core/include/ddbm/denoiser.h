// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_DENOISER_H_
#define DDBM_DENOISER_H_

#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ddbm/bridge.h"
#include "ddbm/film_mlp.h"
#include "ddbm/schedule.h"

namespace ddbm {

struct DenoiserConfig {
  int action_dim = 16;
  std::vector<int> hidden = {64, 64, 64};
  int context_dim = 16;
  int time_embed_dim = 4;
  // Feed aT / sigma_dataT to the network next to c_in * a_t.
  bool prior_input = true;
};

void to_json(nlohmann::json& j, const DenoiserConfig& c);
void from_json(const nlohmann::json& j, DenoiserConfig& c);

NetworkSpec DenoiserNetworkSpec(const DenoiserConfig& config);

// D_theta(a_t, t, aT, c) = c_skip a_t + c_out F(c_in a_t, aT, c_noise, c),
// evaluated column-wise with a per-column time.
class BridgeDenoiser {
 public:
  struct Tape {
    FilmMlp::Tape net;
    Vector c_out;
  };

  BridgeDenoiser(const DenoiserConfig& config, const NoiseSchedule& schedule);

  const DenoiserConfig& config() const { return config_; }
  const FilmMlp& net() const { return net_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const DataMoments& moments() const { return moments_; }
  Eigen::Index parameter_count() const { return net_.parameter_count(); }

  Matrix Denoise(const Vector& params, const Matrix& a_t, const Vector& t,
                 const Matrix& aT, const Matrix& context,
                 Tape* tape = nullptr) const;

  // Gradients of a loss given dL/dD; a_t and aT are treated as constants.
  FilmMlp::Gradients Backward(const Vector& params, const Tape& tape,
                              const Matrix& d_output) const;

 private:
  DenoiserConfig config_;
  NoiseSchedule schedule_;
  DataMoments moments_;
  FilmMlp net_;
};

}  // namespace ddbm

#endif  // DDBM_DENOISER_H_
