#pragma once

#include <cstddef>
#include <functional>

namespace orientdet {

// Thread count from ORIENTDET_THREADS; falls back to `fallback` when unset,
// empty or not a positive integer.
int ThreadsFromEnv(int fallback = 1);

// Runs fn(i) for i in [0, n) on up to `threads` workers. Indices are handed
// out dynamically; the first exception thrown is rethrown after all workers
// have stopped.
void ParallelFor(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace orientdet
