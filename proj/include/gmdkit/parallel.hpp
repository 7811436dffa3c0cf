#pragma once

#include <cstddef>
#include <functional>

namespace gmdkit {

// Worker count: `requested` if positive, else GMDKIT_THREADS, else the number
// of logical cores.
unsigned resolve_threads(int requested = 0);

// Runs body(i) for i in [0, count) on up to `threads` workers. Work items are
// independent; callers write results into per-index slots so the outcome
// does not depend on scheduling. The exception from the lowest failing index
// is rethrown.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace gmdkit
