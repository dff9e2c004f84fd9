#pragma once

#include <cstdint>
#include <functional>

namespace misre {

/// Resolve a worker count: positive values pass through, zero consults the
/// MISRE_THREADS environment variable and falls back to the hardware count.
int resolve_thread_count(int requested);

/// Static-partition parallel loop. The chunk function receives [begin, end)
/// ranges; every range is processed by exactly one worker, so per-index
/// output slots need no synchronization. Results must not depend on the
/// partitioning, which holds for pure per-index work.
void parallel_for(std::int64_t begin, std::int64_t end, int threads,
                  const std::function<void(std::int64_t, std::int64_t)>& chunk);

}  // namespace misre
