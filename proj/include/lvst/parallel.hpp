#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace lvst {

namespace detail {
inline std::atomic<unsigned>& thread_count_ref() {
  static std::atomic<unsigned> count{std::max(1u, std::thread::hardware_concurrency())};
  return count;
}
}  // namespace detail

inline unsigned thread_count() { return detail::thread_count_ref().load(); }
inline void set_thread_count(unsigned n) { detail::thread_count_ref().store(std::max(1u, n)); }

// Runs fn(row) for row in [0, rows). Rows are split into contiguous chunks, one per
// worker; each row is computed by exactly one worker so results never depend on the
// number of threads.
template <typename Fn>
void parallel_rows(std::size_t rows, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), rows);
  if (workers <= 1) {
    for (std::size_t r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (rows + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(rows, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      for (std::size_t r = begin; r < end; ++r) fn(r);
    });
  }
  for (std::size_t r = 0; r < std::min(rows, chunk); ++r) fn(r);
  for (auto& t : pool) t.join();
}

}  // namespace lvst
