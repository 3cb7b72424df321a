#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace spmbd {

/// Worker count and the chunk size that fixes random-stream assignment and
/// reduction order. Results depend on chunk_size but never on threads.
struct Exec {
  unsigned threads = 1;
  std::size_t chunk_size = std::size_t{1} << 16;

  std::size_t chunks(std::size_t n) const { return (n + chunk_size - 1) / chunk_size; }
};

/// Runs fn(index) for index in [0, count) on up to exec.threads workers.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(threads, 1u), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

/// Runs fn(chunk, begin, end) over the fixed chunk decomposition of [0, n).
template <class Fn>
void for_each_chunk(std::size_t n, const Exec& exec, Fn&& fn) {
  parallel_for(exec.chunks(n), exec.threads, [&](std::size_t chunk) {
    const std::size_t begin = chunk * exec.chunk_size;
    fn(chunk, begin, std::min(n, begin + exec.chunk_size));
  });
}

/// Sum of per-chunk partials reduced pairwise in a fixed order.
inline double pairwise_sum(std::vector<double> partials) {
  if (partials.empty()) return 0.0;
  while (partials.size() > 1) {
    std::size_t out = 0;
    for (std::size_t i = 0; i + 1 < partials.size(); i += 2) partials[out++] = partials[i] + partials[i + 1];
    if (partials.size() % 2 == 1) partials[out++] = partials.back();
    partials.resize(out);
  }
  return partials.front();
}

}  // namespace spmbd
