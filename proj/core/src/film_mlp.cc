// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/film_mlp.h"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "ddbm/config.h"
#include "ddbm/random.h"

namespace ddbm {

using ConstMap = Eigen::Map<const Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;
using MutMap = Eigen::Map<Matrix>;
using MutVecMap = Eigen::Map<Vector>;

void to_json(nlohmann::json& j, const NetworkSpec& s) {
  j = nlohmann::json{{"input_dim", s.input_dim},
                     {"hidden", s.hidden},
                     {"output_dim", s.output_dim},
                     {"context_dim", s.context_dim},
                     {"time_embed_dim", s.time_embed_dim}};
}

void from_json(const nlohmann::json& j, NetworkSpec& s) {
  s.input_dim = GetOr(j, "input_dim", s.input_dim, "network");
  s.hidden = GetOr(j, "hidden", s.hidden, "network");
  s.output_dim = GetOr(j, "output_dim", s.output_dim, "network");
  s.context_dim = GetOr(j, "context_dim", s.context_dim, "network");
  s.time_embed_dim = GetOr(j, "time_embed_dim", s.time_embed_dim, "network");
}

void ValidateSpec(const NetworkSpec& spec) {
  if (spec.input_dim + spec.time_embed_dim <= 0 || spec.output_dim <= 0) {
    throw ConfigError("network: input and output widths must be positive");
  }
  for (int w : spec.hidden) {
    if (w <= 0) throw ConfigError("network: zero-width hidden layer");
  }
  if (spec.context_dim < 0 || spec.time_embed_dim < 0 ||
      spec.time_embed_dim % 2 != 0) {
    throw ConfigError("network: time_embed_dim must be even and >= 0");
  }
}

Eigen::Index ParameterCount(const NetworkSpec& spec) {
  ValidateSpec(spec);
  Eigen::Index n = 0;
  int in = spec.input_dim + spec.time_embed_dim;
  for (int w : spec.hidden) {
    n += static_cast<Eigen::Index>(w) * in + w;
    if (spec.context_dim > 0) n += 2 * (static_cast<Eigen::Index>(w) * spec.context_dim + w);
    in = w;
  }
  return n + static_cast<Eigen::Index>(spec.output_dim) * in + spec.output_dim;
}

Matrix TimeEmbedding(const Vector& tau, int dim) {
  Matrix e(dim, tau.size());
  for (Eigen::Index c = 0; c < tau.size(); ++c) {
    double freq = 1.0;
    for (int j = 0; j < dim / 2; ++j) {
      e(2 * j, c) = std::sin(freq * tau[c]);
      e(2 * j + 1, c) = std::cos(freq * tau[c]);
      freq *= 3.0;
    }
  }
  return e;
}

FilmMlp::FilmMlp(NetworkSpec spec) : spec_(std::move(spec)) {
  ValidateSpec(spec_);
  Eigen::Index off = 0;
  int in = spec_.input_dim + spec_.time_embed_dim;
  auto add = [&](int out, bool film) {
    LayerOffsets l{};
    l.in = in;
    l.out = out;
    l.w = off;
    off += static_cast<Eigen::Index>(out) * in;
    l.b = off;
    off += out;
    l.wg = l.bg = l.wb = l.bb = -1;
    if (film) {
      l.wg = off;
      off += static_cast<Eigen::Index>(out) * spec_.context_dim;
      l.bg = off;
      off += out;
      l.wb = off;
      off += static_cast<Eigen::Index>(out) * spec_.context_dim;
      l.bb = off;
      off += out;
    }
    layers_.push_back(l);
    in = out;
  };
  for (int w : spec_.hidden) add(w, spec_.context_dim > 0);
  add(spec_.output_dim, false);
  count_ = off;
}

Vector FilmMlp::Init(std::uint64_t seed) const {
  Rng rng(seed);
  Vector p = Vector::Zero(count_);
  for (const LayerOffsets& l : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(l.out) * l.in; ++i) {
      p[l.w + i] = rng.Uniform(-bound, bound);
    }
    for (int i = 0; i < l.out; ++i) p[l.b + i] = rng.Uniform(-bound, bound);
  }
  return p;
}

Matrix FilmMlp::Forward(const Vector& params, const Matrix& input,
                        const Vector& time, const Matrix& context,
                        Tape* tape) const {
  if (params.size() != count_) {
    throw ShapeError("forward: expected " + std::to_string(count_) +
                     " parameters, got " + std::to_string(params.size()));
  }
  const Eigen::Index batch = input.cols();
  if (input.rows() != spec_.input_dim) throw ShapeError("forward: input rows");
  if (spec_.time_embed_dim > 0 && time.size() != batch) {
    throw ShapeError("forward: time length");
  }
  const bool film = spec_.context_dim > 0;
  if (film && (context.rows() != spec_.context_dim || context.cols() != batch)) {
    throw ShapeError("forward: context shape");
  }

  Matrix x(spec_.input_dim + spec_.time_embed_dim, batch);
  x.topRows(spec_.input_dim) = input;
  if (spec_.time_embed_dim > 0) {
    x.bottomRows(spec_.time_embed_dim) = TimeEmbedding(time, spec_.time_embed_dim);
  }
  if (tape != nullptr) {
    tape->input = x;
    tape->context = film ? context : Matrix();
    tape->pre.clear();
    tape->gamma.clear();
    tape->post.clear();
  }

  const double* p = params.data();
  for (std::size_t li = 0; li + 1 < layers_.size(); ++li) {
    const LayerOffsets& l = layers_[li];
    Matrix z = ConstMap(p + l.w, l.out, l.in) * x;
    z.colwise() += ConstVecMap(p + l.b, l.out);
    Matrix h;
    if (film) {
      Matrix gamma = ConstMap(p + l.wg, l.out, spec_.context_dim) * context;
      gamma.colwise() += ConstVecMap(p + l.bg, l.out);
      gamma.array() += 1.0;
      Matrix beta = ConstMap(p + l.wb, l.out, spec_.context_dim) * context;
      beta.colwise() += ConstVecMap(p + l.bb, l.out);
      h = (gamma.array() * z.array() + beta.array()).tanh().matrix();
      if (tape != nullptr) tape->gamma.push_back(std::move(gamma));
    } else {
      h = z.array().tanh().matrix();
    }
    if (tape != nullptr) {
      tape->pre.push_back(std::move(z));
      tape->post.push_back(h);
    }
    x = std::move(h);
  }
  const LayerOffsets& o = layers_.back();
  Matrix y = ConstMap(p + o.w, o.out, o.in) * x;
  y.colwise() += ConstVecMap(p + o.b, o.out);
  return y;
}

FilmMlp::Gradients FilmMlp::Backward(const Vector& params, const Tape& tape,
                                     const Matrix& upstream) const {
  const bool film = spec_.context_dim > 0;
  const double* p = params.data();
  Gradients g;
  g.params = Vector::Zero(count_);
  double* gp = g.params.data();
  if (film) g.context = Matrix::Zero(spec_.context_dim, upstream.cols());

  const std::size_t n_hidden = layers_.size() - 1;
  auto layer_input = [&](std::size_t li) -> const Matrix& {
    return li == 0 ? tape.input : tape.post[li - 1];
  };

  const LayerOffsets& o = layers_.back();
  const Matrix& xo = layer_input(n_hidden);
  MutMap(gp + o.w, o.out, o.in).noalias() = upstream * xo.transpose();
  MutVecMap(gp + o.b, o.out) = upstream.rowwise().sum();
  Matrix dx = ConstMap(p + o.w, o.out, o.in).transpose() * upstream;

  for (std::size_t li = n_hidden; li-- > 0;) {
    const LayerOffsets& l = layers_[li];
    const Matrix& h = tape.post[li];
    // d/d(pre-activation after FiLM)
    Matrix dzf = (dx.array() * (1.0 - h.array().square())).matrix();
    Matrix dz;
    if (film) {
      const Matrix& c = tape.context;
      Matrix dgamma = (dzf.array() * tape.pre[li].array()).matrix();
      MutMap(gp + l.wg, l.out, spec_.context_dim).noalias() = dgamma * c.transpose();
      MutVecMap(gp + l.bg, l.out) = dgamma.rowwise().sum();
      MutMap(gp + l.wb, l.out, spec_.context_dim).noalias() = dzf * c.transpose();
      MutVecMap(gp + l.bb, l.out) = dzf.rowwise().sum();
      g.context.noalias() +=
          ConstMap(p + l.wg, l.out, spec_.context_dim).transpose() * dgamma;
      g.context.noalias() +=
          ConstMap(p + l.wb, l.out, spec_.context_dim).transpose() * dzf;
      dz = (dzf.array() * tape.gamma[li].array()).matrix();
    } else {
      dz = std::move(dzf);
    }
    const Matrix& x = layer_input(li);
    MutMap(gp + l.w, l.out, l.in).noalias() = dz * x.transpose();
    MutVecMap(gp + l.b, l.out) = dz.rowwise().sum();
    dx = ConstMap(p + l.w, l.out, l.in).transpose() * dz;
  }
  g.input = dx.topRows(spec_.input_dim);
  return g;
}

double FiniteDiffCheck(const FilmMlp& net, const Vector& params,
                       const Matrix& input, const Vector& time,
                       const Matrix& context, double eps, std::uint64_t seed,
                       int coords) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw DomainError("finite_diff_check: eps must lie in [1e-7, 1e-3]");
  }
  Rng rng(seed);
  const Matrix upstream = rng.NormalMatrix(net.spec().output_dim, input.cols());
  FilmMlp::Tape tape;
  net.Forward(params, input, time, context, &tape);
  const Vector analytic = net.Backward(params, tape, upstream).params;
  auto loss = [&](const Vector& q) {
    return (upstream.array() * net.Forward(q, input, time, context).array()).sum();
  };
  double worst = 0.0;
  Vector q = params;
  for (int n = 0; n < coords; ++n) {
    const Eigen::Index i = static_cast<Eigen::Index>(
        rng.Index(static_cast<std::size_t>(params.size())));
    q[i] = params[i] + eps;
    const double up = loss(q);
    q[i] = params[i] - eps;
    const double down = loss(q);
    q[i] = params[i];
    const double numeric = (up - down) / (2.0 * eps);
    const double scale =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

}  // namespace ddbm
