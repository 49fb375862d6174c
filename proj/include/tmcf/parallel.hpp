#pragma once

#include <cstddef>
#include <functional>

namespace tmcf {

/// Worker cap: TMCF_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
int thread_budget();

/// Runs body(k) for k in [0, count). Each index is processed exactly once;
/// callers write into per-index slots so the merged result does not depend
/// on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace tmcf
