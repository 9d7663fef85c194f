// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "ddbm/random.h"
#include "ddbm/toybench.h"

namespace ddbm {
namespace {

void BM_EmdPoints(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Rng rng(1);
  const Matrix a = rng.NormalMatrix(2, n), b = rng.NormalMatrix(2, n);
  for (auto _ : state) benchmark::DoNotOptimize(EmdPoints(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EmdPoints)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

}  // namespace
}  // namespace ddbm
