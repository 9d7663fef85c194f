// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "ddbm/denoiser.h"
#include "ddbm/film_mlp.h"
#include "ddbm/random.h"

namespace ddbm {
namespace {

void BM_FilmMlpForward(benchmark::State& state) {
  const DenoiserConfig dc;
  const FilmMlp net(DenoiserNetworkSpec(dc));
  const Vector p = net.Init(1);
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  Rng rng(2);
  const Matrix x = rng.NormalMatrix(net.spec().input_dim, batch);
  const Vector tau = rng.NormalVector(batch);
  const Matrix ctx = rng.NormalMatrix(dc.context_dim, batch);
  for (auto _ : state) benchmark::DoNotOptimize(net.Forward(p, x, tau, ctx, nullptr));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_FilmMlpForward)->Arg(1)->Arg(64)->Arg(256);

void BM_FilmMlpForwardBackward(benchmark::State& state) {
  const DenoiserConfig dc;
  const FilmMlp net(DenoiserNetworkSpec(dc));
  const Vector p = net.Init(1);
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  Rng rng(3);
  const Matrix x = rng.NormalMatrix(net.spec().input_dim, batch);
  const Vector tau = rng.NormalVector(batch);
  const Matrix ctx = rng.NormalMatrix(dc.context_dim, batch);
  const Matrix upstream = rng.NormalMatrix(net.spec().output_dim, batch);
  for (auto _ : state) {
    FilmMlp::Tape tape;
    benchmark::DoNotOptimize(net.Forward(p, x, tau, ctx, &tape));
    benchmark::DoNotOptimize(net.Backward(p, tape, upstream));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_FilmMlpForwardBackward)->Arg(64);

}  // namespace
}  // namespace ddbm
