#pragma once

#include <cstddef>
#include <functional>

namespace nsrds {

// Worker cap for all parallel loops; 0 means hardware concurrency.
void set_thread_limit(unsigned threads);
unsigned thread_limit();

// Runs body(i) for i in [0, n) on up to thread_limit() threads. Each index
// must write only to its own output slot; the first exception thrown by any
// worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace nsrds
