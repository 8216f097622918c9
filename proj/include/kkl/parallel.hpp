#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace kkl {

// Runs body(i) for i in [0, n) across OpenMP threads. Each index must write
// only to its own output slot. If any iteration throws, the exception of the
// lowest failing index is rethrown after the loop.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Caps the OpenMP worker count; 0 leaves the runtime default.
void set_thread_limit(int threads);
int thread_limit();

}  // namespace kkl
