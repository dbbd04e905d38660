#pragma once

#include <cstddef>
#include <functional>

namespace levelflow {

// Global cap on worker threads. 0 means "read LEVELFLOW_THREADS, else 1".
void set_thread_limit(int n);
int thread_limit();

// Runs body(i) for i in [0, count). Each index is processed exactly once and
// bodies must not share mutable state, so results never depend on the
// thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

} // namespace levelflow
