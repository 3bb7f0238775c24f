#ifndef BSS_PARALLEL_HPP
#define BSS_PARALLEL_HPP

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace bss {

// Runs fn(i) for i in [0, count) on up to num_threads threads. Each index is
// processed exactly once and writes only its own slice in all call sites, so
// the result does not depend on the schedule. num_threads <= 1 runs inline.
inline void parallel_for(std::size_t count, int num_threads,
                         const std::function<void(std::size_t)>& fn) {
  if (num_threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(num_threads), count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace bss

#endif  // BSS_PARALLEL_HPP
