#pragma once

#include <cstddef>
#include <functional>

namespace simgat {

/// Worker count: SIMGAT_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
std::size_t default_threads();

/// Calls fn(i) for i in [0, n) across up to `threads` workers. Each index is
/// visited exactly once; results must be written to per-index slots. The
/// first exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t threads = default_threads());

}  // namespace simgat
