#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "nlh/types.hpp"

namespace nlh {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> threads{0};
  return threads;
}

// Set inside worker threads so nested loops run serially.
inline bool& inside_worker() {
  thread_local bool inside = false;
  return inside;
}
}  // namespace detail

/// Worker count used by parallel loops; 0 means hardware concurrency.
inline void set_thread_count(int threads) { detail::thread_setting() = std::max(0, threads); }

inline int thread_count() {
  const int t = detail::thread_setting();
  if (t > 0) return t;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [begin, end) over contiguous chunks. Each index is
/// visited exactly once, so callers writing disjoint memory per index need no
/// synchronization. The first exception thrown by a worker is rethrown.
/// Calls made from inside a worker run serially on that worker.
template <typename Fn>
void parallel_for(Index begin, Index end, Fn&& fn) {
  const Index count = end - begin;
  if (count <= 0) return;
  const Index workers = detail::inside_worker() ? 1 : std::min<Index>(thread_count(), count);
  if (workers <= 1) {
    for (Index i = begin; i < end; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const Index chunk = (count + workers - 1) / workers;
  for (Index w = 0; w < workers; ++w) {
    const Index lo = begin + w * chunk;
    const Index hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      detail::inside_worker() = true;
      try {
        for (Index i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace nlh
