#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace starparadox {

// Number of workers to use when the caller passes jobs <= 0.
inline auto default_jobs() -> int {
  auto hw = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, hw);
}

// Calls fn(k) for every k in [0, num_tasks) using up to `jobs` threads.  Tasks must write their
// results to slots indexed by k; any reduction happens afterwards in index order, which keeps
// results bit-identical for every worker count.
template <typename Fn>
auto parallel_for(std::int64_t num_tasks, int jobs, Fn&& fn) -> void {
  if (jobs <= 0) {
    jobs = default_jobs();
  }
  auto workers = static_cast<int>(std::min<std::int64_t>(jobs, num_tasks));
  if (workers <= 1) {
    for (auto k = std::int64_t{0}; k != num_tasks; ++k) {
      fn(k);
    }
    return;
  }

  auto next = std::atomic<std::int64_t>{0};
  auto failure = std::exception_ptr{};
  auto failure_mutex = std::mutex{};
  auto body = [&] {
    for (;;) {
      auto k = next.fetch_add(1);
      if (k >= num_tasks) {
        return;
      }
      try {
        fn(k);
      } catch (...) {
        auto lock = std::scoped_lock{failure_mutex};
        if (!failure) {
          failure = std::current_exception();
        }
        next.store(num_tasks);
        return;
      }
    }
  };

  auto threads = std::vector<std::thread>{};
  threads.reserve(static_cast<std::size_t>(workers));
  for (auto w = 0; w != workers; ++w) {
    threads.emplace_back(body);
  }
  for (auto& th : threads) {
    th.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

}  // namespace starparadox
