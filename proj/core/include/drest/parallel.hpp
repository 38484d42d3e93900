#pragma once

#include <cstddef>
#include <functional>

namespace drest {

// Calls fn(i) for every i in [0, count) on up to `workers` threads
// (0 = hardware concurrency). Work items are claimed dynamically, so callers
// must write results into slots indexed by i and reduce afterwards. The first
// exception thrown by any item is rethrown on the calling thread.
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t)>& fn);

unsigned resolve_workers(unsigned requested) noexcept;

}  // namespace drest
