// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/denoiser.h"

#include <nlohmann/json.hpp>

#include "ddbm/config.h"

namespace ddbm {

void to_json(nlohmann::json& j, const DenoiserConfig& c) {
  j = nlohmann::json{{"action_dim", c.action_dim},
                     {"hidden", c.hidden},
                     {"context_dim", c.context_dim},
                     {"time_embed_dim", c.time_embed_dim},
                     {"prior_input", c.prior_input}};
}

void from_json(const nlohmann::json& j, DenoiserConfig& c) {
  c.action_dim = GetOr(j, "action_dim", c.action_dim, "denoiser");
  c.hidden = GetOr(j, "hidden", c.hidden, "denoiser");
  c.context_dim = GetOr(j, "context_dim", c.context_dim, "denoiser");
  c.time_embed_dim = GetOr(j, "time_embed_dim", c.time_embed_dim, "denoiser");
  c.prior_input = GetOr(j, "prior_input", c.prior_input, "denoiser");
  if (c.action_dim <= 0) throw ConfigError("denoiser.action_dim must be positive");
}

NetworkSpec DenoiserNetworkSpec(const DenoiserConfig& config) {
  NetworkSpec spec;
  spec.input_dim = config.action_dim * (config.prior_input ? 2 : 1);
  spec.hidden = config.hidden;
  spec.output_dim = config.action_dim;
  spec.context_dim = config.context_dim;
  spec.time_embed_dim = config.time_embed_dim;
  return spec;
}

BridgeDenoiser::BridgeDenoiser(const DenoiserConfig& config,
                               const NoiseSchedule& schedule)
    : config_(config),
      schedule_(schedule),
      moments_(MomentsFromConfig(schedule.config())),
      net_(DenoiserNetworkSpec(config)) {}

Matrix BridgeDenoiser::Denoise(const Vector& params, const Matrix& a_t,
                               const Vector& t, const Matrix& aT,
                               const Matrix& context, Tape* tape) const {
  const Eigen::Index batch = a_t.cols();
  const int dim = config_.action_dim;
  if (a_t.rows() != dim || aT.rows() != dim || aT.cols() != batch ||
      t.size() != batch) {
    throw ShapeError("denoiser: a_t, aT and t shapes disagree");
  }
  Vector c_skip(batch), c_out(batch), c_noise(batch);
  Matrix input(net_.spec().input_dim, batch);
  const double inv_sigma_T = moments_.sigmaT > 0.0 ? 1.0 / moments_.sigmaT : 1.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const ScalingSet s = ComputeScaling(schedule_, t[j], moments_);
    c_skip[j] = s.c_skip;
    c_out[j] = s.c_out;
    c_noise[j] = s.c_noise;
    input.block(0, j, dim, 1) = s.c_in * a_t.col(j);
    if (config_.prior_input) input.block(dim, j, dim, 1) = inv_sigma_T * aT.col(j);
  }
  FilmMlp::Tape* net_tape = tape != nullptr ? &tape->net : nullptr;
  const Matrix raw = net_.Forward(params, input, c_noise, context, net_tape);
  if (tape != nullptr) tape->c_out = c_out;
  return a_t * c_skip.asDiagonal() + raw * c_out.asDiagonal();
}

FilmMlp::Gradients BridgeDenoiser::Backward(const Vector& params,
                                            const Tape& tape,
                                            const Matrix& d_output) const {
  // g.input is with respect to the scaled network input.
  return net_.Backward(params, tape.net, d_output * tape.c_out.asDiagonal());
}

}  // namespace ddbm
