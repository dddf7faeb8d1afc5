#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace fairlat {

/// Runs fn(0..n_tasks) across up to `jobs` threads. Tasks must be mutually
/// independent; the first exception (by task index) is rethrown after all
/// workers join, so results stay deterministic regardless of thread count.
inline void run_parallel(std::size_t n_tasks, int jobs,
                         const std::function<void(std::size_t)>& fn) {
  if (n_tasks == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(std::max(jobs, 1), n_tasks);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n_tasks);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n_tasks) return;
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace fairlat
