#pragma once

#include <cstddef>
#include <functional>

namespace mlrel {

// Worker count used by parallel_for when none is given. Reads MLREL_THREADS
// once; falls back to hardware concurrency.
std::size_t default_thread_count();
void set_default_thread_count(std::size_t n);

// Runs body(i) for i in [0, n) on up to `threads` workers using static
// contiguous chunks. Bodies must write only to slot i of their output, which
// keeps results identical under any thread count. The first exception thrown
// by a body is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t threads = 0);

}  // namespace mlrel
