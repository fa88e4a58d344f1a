#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace irsdp {

/// Runs f(0..n-1), fanning out over up to `workers` threads. Nested calls
/// run sequentially so worker counts do not multiply.
inline void parallel_map(int n, int workers, const std::function<void(int)>& f) {
  thread_local bool inside = false;
  if (workers <= 1 || n <= 1 || inside) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    inside = true;
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) f(i);
    inside = false;
  };
  const int count = std::min(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(count) - 1);
  for (int t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace irsdp
