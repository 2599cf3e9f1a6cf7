#pragma once

#include <cstddef>
#include <functional>

namespace sneurod {

/// Worker-thread cap. Defaults to SNEUROD_THREADS from the environment, or 1.
std::size_t worker_threads();
void set_worker_threads(std::size_t n);

/// Runs body(i) for i in [0, n). Iterations must write disjoint outputs;
/// results are then independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sneurod
