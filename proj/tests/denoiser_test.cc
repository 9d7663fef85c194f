// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "ddbm/denoiser.h"
#include "ddbm/film_mlp.h"
#include "ddbm/random.h"

namespace ddbm {
namespace {

NetworkSpec SmallSpec(int context_dim) {
  NetworkSpec s;
  s.input_dim = 6;
  s.hidden = {12, 10};
  s.output_dim = 6;
  s.context_dim = context_dim;
  s.time_embed_dim = 4;
  return s;
}

TEST(FilmMlp, ParameterCountPlainMlp) {
  NetworkSpec s;
  s.input_dim = 16;
  s.hidden = {64, 64};
  s.output_dim = 16;
  const Eigen::Index expected = (16 * 64 + 64) + (64 * 64 + 64) + (64 * 16 + 16);
  EXPECT_EQ(expected, 6288);
  EXPECT_EQ(ParameterCount(s), expected);
  EXPECT_EQ(FilmMlp(s).parameter_count(), expected);
}

TEST(FilmMlp, ParameterCountWithFilmAndEmbedding) {
  NetworkSpec s;
  s.input_dim = 16;
  s.hidden = {64, 64, 64};
  s.output_dim = 16;
  s.context_dim = 16;
  s.time_embed_dim = 4;
  // Layer 1 sees 20 inputs; each hidden layer adds two 64x16 maps plus biases.
  const Eigen::Index film = 3 * 2 * (64 * 16 + 64);
  const Eigen::Index dense = (20 * 64 + 64) + 2 * (64 * 64 + 64) + (64 * 16 + 16);
  EXPECT_EQ(ParameterCount(s), dense + film);
}

TEST(FilmMlp, RejectsBadSpecs) {
  NetworkSpec s = SmallSpec(0);
  s.hidden = {8, 0};
  EXPECT_THROW(FilmMlp{s}, ConfigError);
  s = SmallSpec(0);
  s.time_embed_dim = 3;
  EXPECT_THROW(FilmMlp{s}, ConfigError);
}

TEST(FilmMlp, InitDeterministicPerSeed) {
  const FilmMlp net(SmallSpec(3));
  const Vector a = net.Init(4), b = net.Init(4), c = net.Init(5);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_TRUE(a.allFinite());
}

TEST(FilmMlp, InitWeightsBoundedByFanIn) {
  const FilmMlp net(SmallSpec(0));
  const Vector p = net.Init(1);
  // First layer fan-in is 6 + 4 = 10.
  EXPECT_LE(p.head(12 * 10).cwiseAbs().maxCoeff(), 1.0 / std::sqrt(10.0));
}

TEST(FilmMlp, FilmIdentityEqualsPlainNetwork) {
  const FilmMlp film(SmallSpec(5));
  const FilmMlp plain(SmallSpec(0));
  Rng rng(2);
  const Matrix x = rng.NormalMatrix(6, 7);
  const Vector tau = rng.NormalVector(7);
  const Matrix y_plain = plain.Forward(plain.Init(9), x, tau, Matrix(0, 7));
  for (int trial = 0; trial < 3; ++trial) {
    const Matrix ctx = rng.NormalMatrix(5, 7);
    EXPECT_EQ(film.Forward(film.Init(9), x, tau, ctx), y_plain);
  }
}

TEST(FilmMlp, ContextChangesOutputWhenFilmIsActive) {
  const FilmMlp net(SmallSpec(5));
  Rng rng(3);
  const Vector p = net.Init(1) + 0.1 * rng.NormalVector(net.parameter_count());
  const Matrix x = rng.NormalMatrix(6, 1);
  const Vector tau = Vector::Constant(1, 0.2);
  const Matrix a = net.Forward(p, x, tau, rng.NormalMatrix(5, 1));
  const Matrix b = net.Forward(p, x, tau, rng.NormalMatrix(5, 1));
  EXPECT_GT((a - b).norm(), 0.0);
}

TEST(FilmMlp, FiniteForLargeInputs) {
  const FilmMlp net(SmallSpec(5));
  Rng rng(4);
  const Matrix x = 1e3 * Matrix::Ones(6, 4);
  const Matrix y = net.Forward(net.Init(0), x, Vector::Constant(4, 1e3),
                               1e3 * rng.NormalMatrix(5, 4));
  EXPECT_TRUE(y.allFinite());
}

TEST(FilmMlp, ShapeErrors) {
  const FilmMlp net(SmallSpec(5));
  const Vector p = net.Init(0);
  EXPECT_THROW(net.Forward(p, Matrix::Zero(5, 2), Vector::Zero(2), Matrix::Zero(5, 2)), ShapeError);
  EXPECT_THROW(net.Forward(p.head(10), Matrix::Zero(6, 2), Vector::Zero(2), Matrix::Zero(5, 2)),
               ShapeError);
}

TEST(FilmMlp, LinearLayerGradientIsOuterProduct) {
  NetworkSpec s;
  s.input_dim = 3;
  s.hidden = {};
  s.output_dim = 2;
  const FilmMlp net(s);
  Rng rng(6);
  const Vector p = rng.NormalVector(net.parameter_count());
  const Matrix x = rng.NormalMatrix(3, 1);
  const Matrix up = rng.NormalMatrix(2, 1);
  FilmMlp::Tape tape;
  const Matrix y = net.Forward(p, x, Vector(), Matrix(), &tape);
  const Eigen::Map<const Matrix> w(p.data(), 2, 3);
  EXPECT_TRUE(y.isApprox(w * x + p.segment(6, 2), 1e-14));
  const FilmMlp::Gradients g = net.Backward(p, tape, up);
  const Eigen::Map<const Matrix> gw(g.params.data(), 2, 3);
  EXPECT_TRUE(gw.isApprox(up * x.transpose(), 1e-14));
  EXPECT_TRUE(g.params.segment(6, 2).isApprox(up.col(0), 1e-14));
}

TEST(FilmMlp, ZeroUpstreamGivesZeroGradient) {
  const FilmMlp net(SmallSpec(5));
  Rng rng(7);
  const Vector p = net.Init(0) + 0.1 * rng.NormalVector(net.parameter_count());
  FilmMlp::Tape tape;
  net.Forward(p, rng.NormalMatrix(6, 3), rng.NormalVector(3), rng.NormalMatrix(5, 3), &tape);
  const FilmMlp::Gradients g = net.Backward(p, tape, Matrix::Zero(6, 3));
  EXPECT_TRUE(g.params.isZero(0.0));
}

TEST(FilmMlp, InputAndContextGradientsMatchFiniteDifferences) {
  const FilmMlp net(SmallSpec(5));
  Rng rng(8);
  const Vector p = net.Init(0) + 0.2 * rng.NormalVector(net.parameter_count());
  const Matrix x = rng.NormalMatrix(6, 2), ctx = rng.NormalMatrix(5, 2);
  const Vector tau = rng.NormalVector(2);
  const Matrix up = rng.NormalMatrix(6, 2);
  FilmMlp::Tape tape;
  net.Forward(p, x, tau, ctx, &tape);
  const FilmMlp::Gradients g = net.Backward(p, tape, up);
  auto loss = [&](const Matrix& xx, const Matrix& cc) {
    return (up.array() * net.Forward(p, xx, tau, cc).array()).sum();
  };
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix a = x, b = x;
    a.data()[i] += h;
    b.data()[i] -= h;
    EXPECT_NEAR(g.input.data()[i], (loss(a, ctx) - loss(b, ctx)) / (2 * h), 1e-7);
  }
  for (Eigen::Index i = 0; i < ctx.size(); ++i) {
    Matrix a = ctx, b = ctx;
    a.data()[i] += h;
    b.data()[i] -= h;
    EXPECT_NEAR(g.context.data()[i], (loss(x, a) - loss(x, b)) / (2 * h), 1e-7);
  }
}

TEST(FiniteDiffCheck, BelowToleranceOverTenDraws) {
  DenoiserConfig dc;
  const FilmMlp net(DenoiserNetworkSpec(dc));
  Rng rng(10);
  for (int draw = 0; draw < 10; ++draw) {
    const Vector p = net.Init(draw) + 0.1 * rng.NormalVector(net.parameter_count());
    const Matrix x = rng.NormalMatrix(net.spec().input_dim, 4);
    const Vector tau = rng.NormalVector(4);
    const Matrix ctx = rng.NormalMatrix(dc.context_dim, 4);
    EXPECT_LT(FiniteDiffCheck(net, p, x, tau, ctx, 1e-5, draw), 1e-5) << "draw " << draw;
  }
}

TEST(FiniteDiffCheck, RejectsBadStepAndIsDeterministic) {
  const FilmMlp net(SmallSpec(5));
  const Vector p = net.Init(0);
  Rng rng(11);
  const Matrix x = rng.NormalMatrix(6, 2), ctx = rng.NormalMatrix(5, 2);
  const Vector tau = rng.NormalVector(2);
  EXPECT_THROW(FiniteDiffCheck(net, p, x, tau, ctx, 0.0, 1), DomainError);
  EXPECT_THROW(FiniteDiffCheck(net, p, x, tau, ctx, 1e-2, 1), DomainError);
  EXPECT_EQ(FiniteDiffCheck(net, p, x, tau, ctx, 1e-5, 3),
            FiniteDiffCheck(net, p, x, tau, ctx, 1e-5, 3));
}

TEST(BridgeDenoiser, DataEndReturnsState) {
  const NoiseSchedule schedule;
  DenoiserConfig dc;
  dc.action_dim = 4;
  dc.hidden = {8};
  dc.context_dim = 2;
  const BridgeDenoiser model(dc, schedule);
  Rng rng(12);
  const Vector p = model.net().Init(1);
  const Matrix at = rng.NormalMatrix(4, 3);
  const Matrix d = model.Denoise(p, at, Vector::Constant(3, schedule.t_min()),
                                 rng.NormalMatrix(4, 3), rng.NormalMatrix(2, 3));
  // c_skip -> 1 and c_out -> 0 at t_min.
  EXPECT_LT((d - at).cwiseAbs().maxCoeff(), 1e-2);
}

TEST(BridgeDenoiser, PureFunction) {
  const NoiseSchedule schedule;
  const BridgeDenoiser model(DenoiserConfig{}, schedule);
  Rng rng(13);
  const Vector p = model.net().Init(2);
  const Matrix at = rng.NormalMatrix(16, 5), aT = rng.NormalMatrix(16, 5), c = rng.NormalMatrix(16, 5);
  const Vector t = Vector::LinSpaced(5, 0.1, 0.9);
  EXPECT_EQ(model.Denoise(p, at, t, aT, c), model.Denoise(p, at, t, aT, c));
}

TEST(BridgeDenoiser, PlainSignatureWithoutPriorInput) {
  DenoiserConfig dc;
  dc.prior_input = false;
  dc.context_dim = 0;
  dc.time_embed_dim = 0;
  dc.hidden = {64, 64};
  EXPECT_EQ(BridgeDenoiser(dc, NoiseSchedule()).parameter_count(), 6288);
}

}  // namespace
}  // namespace ddbm
