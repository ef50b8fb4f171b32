#pragma once

#include <cstddef>
#include <functional>

namespace hmog {

/// Process-wide worker count used by parallel_for; 0 or 1 runs inline.
void set_worker_count(std::size_t workers);
std::size_t worker_count();

/// Calls body(i) for i in [0, n). Nested calls from inside a body run inline. Iterations may run concurrently and in any
/// order, so each must write only to its own slot. The exception from the lowest
/// failing index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hmog
