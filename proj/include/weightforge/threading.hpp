#pragma once

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace wf {

// Worker cap: WEIGHTFORGE_THREADS when set, hardware concurrency otherwise,
// never below 1.
inline std::size_t thread_cap() {
  if (const char* env = std::getenv("WEIGHTFORGE_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed >= 1) {
      return static_cast<std::size_t>(parsed);
    }
    return 1;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<std::size_t>(hw);
}

// Runs fn(0..n-1) over at most `threads` workers (0 = thread_cap()).
// Block partitioning; each index is visited exactly once, so results written
// to per-index slots are identical for any worker count. The first exception
// thrown by a worker is rethrown after join.
inline void parallel_for(std::size_t n,
                         const std::function<void(std::size_t)>& fn,
                         std::size_t threads = 0) {
  if (n == 0) {
    return;
  }
  std::size_t workers = threads == 0 ? thread_cap() : threads;
  if (workers > n) {
    workers = n;
  }
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }

  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) {
          fn(i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
  for (const auto& err : errors) {
    if (err) {
      std::rethrow_exception(err);
    }
  }
}

}  // namespace wf
