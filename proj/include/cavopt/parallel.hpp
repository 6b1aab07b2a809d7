#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace cavopt {

// Global worker count for assembly-style loops. Output must never depend on
// it: every parallel_for body writes to a slot indexed by the loop variable.
int thread_count();
void set_thread_count(int n);

// Static block partition of [0, n). Runs inline when a single worker is
// requested or the range is small.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace cavopt
