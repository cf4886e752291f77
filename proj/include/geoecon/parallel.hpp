#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace geoecon {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{0};  // 0 = hardware concurrency
  return n;
}
inline thread_local bool inside_parallel = false;
}  // namespace detail

inline void set_threads(int n) { detail::thread_setting().store(n < 0 ? 0 : n); }

inline int thread_count() {
  const int n = detail::thread_setting().load();
  if (n > 0) return n;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static block schedule over [begin, end). f(i) must only write state owned
// by index i; with that contract the result is identical for any thread
// count. Nested calls run serially on the calling thread.
template <class F>
void parallel_for(std::size_t begin, std::size_t end, F&& f) {
  const std::size_t n = end > begin ? end - begin : 0;
  if (n == 0) return;
  const auto workers =
      detail::inside_parallel
          ? std::size_t{1}
          : std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  if (workers <= 1) {
    for (std::size_t i = begin; i < end; ++i) f(i);
    return;
  }

  std::mutex err_mutex;
  std::exception_ptr first_error;
  const std::size_t chunk = (n + workers - 1) / workers;
  auto run = [&](std::size_t lo, std::size_t hi) {
    detail::inside_parallel = true;
    try {
      for (std::size_t i = lo; i < hi; ++i) f(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mutex);
      if (!first_error) first_error = std::current_exception();
    }
    detail::inside_parallel = false;
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t lo = begin + w * chunk;
    const std::size_t hi = std::min(end, lo + chunk);
    if (lo < hi) pool.emplace_back(run, lo, hi);
  }
  run(begin, std::min(end, begin + chunk));
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace geoecon
