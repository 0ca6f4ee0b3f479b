#pragma once

#include <cstddef>
#include <functional>

namespace ganscope::harness {

/// Worker count from GANSCOPE_THREADS, else the hardware concurrency.
int worker_count();

/// Runs task(i) for i in [0, n) on up to worker_count() threads. Tasks must
/// write only to their own outputs. The first exception is rethrown after
/// all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task);

}  // namespace ganscope::harness
