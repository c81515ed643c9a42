#pragma once

#include <cstddef>
#include <functional>

namespace heloc {

/// Worker count: HELOC_THREADS when set to a positive integer, otherwise the
/// hardware concurrency.
std::size_t thread_count();

/// Runs fn(i) for i in [0, n) on up to thread_count() threads. Exceptions are
/// rethrown on the caller after all workers finish (the lowest index wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace heloc
