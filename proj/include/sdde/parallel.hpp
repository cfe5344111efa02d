#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace sdde {

inline unsigned resolve_thread_count(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

// Runs fn(i) for every i in [0, n). Items are claimed through a shared atomic
// counter and each item writes only its own outputs, so the result is a pure
// function of the inputs and never of the thread count or schedule. Callers
// that reduce across items must do so in index order after the loop returns.
template <typename Fn>
void parallel_for(std::size_t n, unsigned n_threads, Fn&& fn) {
  if (n == 0) return;
  if (n_threads == 0) n_threads = 1;
  if (static_cast<std::size_t>(n_threads) > n) n_threads = static_cast<unsigned>(n);

  if (n_threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(n, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  if (first_error) std::rethrow_exception(first_error);
}

// Chunk geometry for reductions. Accumulation happens sequentially inside a
// chunk and chunks are combined in index order, which keeps Monte Carlo sums
// bit-identical for any thread count.
inline constexpr std::size_t kReductionChunk = 1024;

inline std::size_t chunk_count(std::size_t n_items) {
  return (n_items + kReductionChunk - 1) / kReductionChunk;
}

inline std::pair<std::size_t, std::size_t> chunk_bounds(std::size_t chunk, std::size_t n_items) {
  const std::size_t lo = chunk * kReductionChunk;
  const std::size_t hi = std::min(n_items, lo + kReductionChunk);
  return {lo, hi};
}

}  // namespace sdde
