// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "ddbm/denoiser.h"
#include "ddbm/random.h"
#include "ddbm/sampler.h"

namespace ddbm {
namespace {

void BM_SampleNetwork(benchmark::State& state) {
  const NoiseSchedule schedule;
  const DenoiserConfig dc;
  const BridgeDenoiser model(dc, schedule);
  const Vector p = model.net().Init(1);
  Rng rng(2);
  const Matrix ctx = rng.NormalMatrix(dc.context_dim, 64);
  const NetworkDenoiser denoiser(model, p, ctx);
  const Matrix aT = rng.NormalMatrix(dc.action_dim, 64);
  SamplerOptions o;
  o.steps = static_cast<int>(state.range(0));
  o.mode = state.range(1) == 0 ? SampleMode::kOde : SampleMode::kSde;
  o.keep_trace = false;
  for (auto _ : state) benchmark::DoNotOptimize(Sample(denoiser, schedule, aT, o).final_state);
}
BENCHMARK(BM_SampleNetwork)->Args({1, 0})->Args({10, 0})->Args({10, 1});

void BM_OracleOdeStep(benchmark::State& state) {
  const NoiseSchedule schedule;
  Rng rng(3);
  const Matrix a0 = rng.NormalMatrix(16, 256), aT = rng.NormalMatrix(16, 256);
  const OracleDenoiser oracle(a0);
  for (auto _ : state) benchmark::DoNotOptimize(OdeStep(aT, 0.9, 0.8, oracle, schedule, aT));
}
BENCHMARK(BM_OracleOdeStep);

}  // namespace
}  // namespace ddbm
