#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace poolfreq {

// Runs fn(0..jobs-1) on up to `threads` workers (0 = one per job). The
// first captured exception is rethrown after all workers finish.
inline void parallel_for(int jobs, int threads, const std::function<void(int)>& fn) {
  if (jobs <= 0) return;
  if (threads <= 0) threads = jobs;
  threads = std::min(threads, jobs);
  if (threads <= 1) {
    for (int j = 0; j < jobs; ++j) fn(j);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<size_t>(jobs));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&]() {
      for (int j = next.fetch_add(1); j < jobs; j = next.fetch_add(1)) {
        try {
          fn(j);
        } catch (...) {
          errors[static_cast<size_t>(j)] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace poolfreq
