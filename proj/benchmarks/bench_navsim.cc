// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "ddbm/navsim.h"

namespace ddbm {
namespace {

void BM_ExpertPlannerBuild(benchmark::State& state) {
  const WorldLayout w = GenerateLayout(7, Difficulty::kCluttered);
  for (auto _ : state) {
    const ExpertPlanner planner(w);
    benchmark::DoNotOptimize(planner.nodes().size());
  }
}
BENCHMARK(BM_ExpertPlannerBuild);

void BM_ExpertRollout(benchmark::State& state) {
  const WorldLayout w = GenerateLayout(7, Difficulty::kCluttered);
  const ExpertPlanner planner(w);
  const NavPolicy policy = ExpertNavPolicy(planner);
  const RolloutConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(Rollout(policy, w, cfg, 1).path_length);
}
BENCHMARK(BM_ExpertRollout);

void BM_Observe(benchmark::State& state) {
  const WorldLayout w = GenerateLayout(7, Difficulty::kCluttered);
  for (auto _ : state) benchmark::DoNotOptimize(Observe(w, w.start, {}).ranges[0]);
}
BENCHMARK(BM_Observe);

}  // namespace
}  // namespace ddbm
