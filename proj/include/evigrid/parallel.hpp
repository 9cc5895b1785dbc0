#pragma once

#include <cstddef>
#include <functional>

namespace evigrid {

/// Worker count for data-parallel loops. A non-zero `requested` wins;
/// otherwise EVIGRID_THREADS is consulted (0 or unset = hardware concurrency).
std::size_t resolve_worker_count(std::size_t requested = 0);

/// Splits [0, n) into contiguous chunks and runs body(begin, end) on up to
/// `workers` threads. Exceptions from any chunk are rethrown on the caller.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace evigrid
