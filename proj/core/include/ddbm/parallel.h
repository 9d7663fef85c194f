// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_PARALLEL_H_
#define DDBM_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace ddbm {

// Calls fn(i) for i in [0, n) on up to `threads` workers. Work items must be
// independent; results are identical for any thread count. The first
// exception thrown by a worker is rethrown after all workers finish.
void ParallelFor(std::size_t n, int threads,
                 const std::function<void(std::size_t)>& fn);

}  // namespace ddbm

#endif  // DDBM_PARALLEL_H_
