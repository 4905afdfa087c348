#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace jigcm {

// Runs fn(begin, end) over `workers` contiguous slices of [0, count). Slices
// are fixed by (count, workers), so results written to disjoint outputs do
// not depend on scheduling.
template <typename Fn>
void parallel_for(int count, int workers, Fn&& fn) {
  workers = std::clamp(workers, 1, std::max(1, count));
  if (workers == 1) {
    fn(0, count);
    return;
  }
  std::vector<std::thread> threads;
  const int step = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int begin = w * step;
    const int end = std::min(count, begin + step);
    if (begin >= end) break;
    threads.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : threads) t.join();
}

}  // namespace jigcm
