#pragma once

#include <cstdint>
#include <functional>

namespace stlane {

// Worker count: STLANE_THREADS env var, else hardware concurrency, clamped to [1,16].
int num_threads();
void set_num_threads(int n);

// Static partition of [begin,end) into contiguous chunks, one per worker.
// Chunks are disjoint, so results never depend on the worker count.
// Runs serially when the range is below `grain` or when called from inside
// another parallel_for.
void parallel_for(int64_t begin, int64_t end, int64_t grain,
                  const std::function<void(int64_t, int64_t)>& body);

}  // namespace stlane
