#pragma once

#include <cstddef>
#include <functional>

namespace smse {

/// Worker count used by shard- and replication-level loops (default 1).
void set_num_threads(std::size_t n);
std::size_t num_threads();

/// Runs body(i) for i in [0, count). Iterations are independent; callers
/// write results into per-index slots and reduce them in index order, so the
/// outcome does not depend on the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace smse
