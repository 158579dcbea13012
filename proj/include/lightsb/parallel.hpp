#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace lightsb {

/// Environment variable controlling the worker count of data-parallel loops.
inline constexpr const char* kThreadsEnv = "LIGHTSB_NUM_THREADS";

namespace detail {
inline std::size_t& thread_override() {
  static std::size_t n = 0;
  return n;
}
}  // namespace detail

/// Overrides the environment for the current process (0 restores it).
inline void set_num_threads(std::size_t n) { detail::thread_override() = n; }

inline std::size_t num_threads() {
  if (detail::thread_override() > 0) {
    return detail::thread_override();
  }
  if (const char* env = std::getenv(kThreadsEnv)) {
    try {
      const long v = std::stol(env);
      if (v > 0) {
        return static_cast<std::size_t>(v);
      }
    } catch (...) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) over contiguous chunks. Work items must write to
/// disjoint outputs; callers reduce afterwards in index order, which keeps
/// results identical for every thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t min_chunk = 64) {
  const std::size_t workers = std::min(num_threads(), (n + min_chunk - 1) / std::max<std::size_t>(min_chunk, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) {
      break;
    }
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) {
          fn(i);
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) {
          error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

}  // namespace lightsb
