#pragma once

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace quasidiag {

// Runs f(0..n-1) on up to `workers` threads; results land at their index, so the
// output never depends on scheduling. The lowest-index exception is rethrown.
template <class F>
auto parallel_map(int n, int workers, F f) -> std::vector<decltype(f(0))> {
  using R = decltype(f(0));
  std::vector<R> out(static_cast<size_t>(n));
  std::vector<std::exception_ptr> errs(static_cast<size_t>(n));
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = f(i);
    return out;
  }
  std::atomic<int> next{0};
  auto body = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        out[static_cast<size_t>(i)] = f(i);
      } catch (...) {
        errs[static_cast<size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  int k = workers < n ? workers : n;
  for (int t = 0; t < k; ++t) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace quasidiag
