#pragma once

#include <cstddef>
#include <functional>

namespace patternforge {

// Worker count: PATTERN_FORGE_THREADS if set (>=1), else hardware concurrency.
std::size_t thread_count();

// Static block partition of [0, n) over thread_count() workers. Each index is
// visited exactly once and writes only its own outputs, so results are
// identical for any worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace patternforge
