#pragma once

#include <cstdint>

namespace voxsr {

/// Worker count, read once from VOXSR_THREADS (unset or invalid → hardware default).
int worker_count();

/// Runs body(i) for i in [0, n). Each index is handled by exactly one worker, so
/// any body that writes only index-owned outputs is deterministic.
template <typename F>
void parallel_for(std::int64_t n, F&& body) {
#ifdef VOXSR_HAVE_OPENMP
#pragma omp parallel for schedule(static) num_threads(worker_count()) if (n > 1)
    for (std::int64_t i = 0; i < n; ++i) body(i);
#else
    for (std::int64_t i = 0; i < n; ++i) body(i);
#endif
}

}  // namespace voxsr
