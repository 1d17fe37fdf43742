#pragma once

#include <cstddef>
#include <functional>

namespace qsat {

/// Worker count used by `parallel_for`. 0 (the default) means
/// `std::thread::hardware_concurrency()`.
void set_thread_count(unsigned threads);
unsigned thread_count();

/// Runs `body(i)` for i in [0, count). Work is handed out dynamically but
/// callers write results by index, so output never depends on the thread
/// count. Nested calls from inside a worker run serially. The first
/// exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace qsat
