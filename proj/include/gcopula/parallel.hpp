#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace gcopula {

/// Splits [0, n) into `workers` contiguous chunks and runs fn(chunk, begin,
/// end) on each, one thread per chunk. Chunk boundaries depend only on n and
/// workers, so callers that reduce per-chunk results in chunk order get a
/// fixed summation order. The first exception thrown by any chunk is
/// rethrown after all threads join.
template <class Fn>
void parallel_chunks(std::size_t n, int workers, Fn&& fn) {
  const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n));
  if (w <= 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(w);
  threads.reserve(w);
  for (std::size_t c = 0; c < w; ++c) {
    const std::size_t begin = n * c / w;
    const std::size_t end = n * (c + 1) / w;
    threads.emplace_back([&, c, begin, end] {
      try {
        fn(c, begin, end);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::size_t chunk_count(std::size_t n, int workers) {
  return std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n));
}

}  // namespace gcopula
