#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace figaro {

inline unsigned default_thread_count() {
  unsigned n = std::thread::hardware_concurrency();
  return n ? n : 1;
}

// Runs fn(begin, end) over disjoint contiguous chunks of [0, n).
// Chunk boundaries depend only on (n, threads), so any per-index work
// that writes to preassigned slots is reproducible across runs.
// Exceptions from workers are rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (n == 0) return;
  const unsigned t = std::min<std::size_t>(std::max(threads, 1u), n);
  if (t <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(t);
  pool.reserve(t);
  for (unsigned w = 0; w < t; ++w) {
    const std::size_t begin = n * w / t;
    const std::size_t end = n * (w + 1) / t;
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errs[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

}  // namespace figaro
