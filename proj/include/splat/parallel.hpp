#pragma once

#include <cstddef>
#include <functional>

namespace splat {

// Resolves a requested worker count; 0 means hardware concurrency.
int resolve_threads(int requested);

// Runs fn(i) for i in [0, n). Tasks are claimed dynamically, so fn must only
// write state owned by task i for results to be independent of `threads`.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace splat
