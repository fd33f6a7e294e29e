#pragma once

#include <functional>

namespace ahho {

// Worker count from AHHO_NUM_THREADS (default 1).
int thread_count();
void set_thread_count(int n);

// Calls body(i) for i in [0, n). Each index is visited exactly once; callers
// write to disjoint slots and reduce afterwards in index order.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace ahho
