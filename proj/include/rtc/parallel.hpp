#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rtc {

inline unsigned default_worker_count() {
  return std::max(1U, std::thread::hardware_concurrency());
}

// Calls fn(i) for every i in [0, n) on up to `workers` threads. Work is
// handed out dynamically; callers write results by index so the outcome does
// not depend on scheduling. The first exception is rethrown after all
// workers have stopped.
template <typename Fn>
void parallel_for(std::size_t const n, unsigned const workers, Fn&& fn) {
  auto const threads =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1U, workers), n));
  if (threads <= 1U) {
    for (auto i = std::size_t{0U}; i != n; ++i) {
      fn(i);
    }
    return;
  }

  auto next = std::atomic_size_t{0U};
  auto failure = std::exception_ptr{};
  auto failure_mutex = std::mutex{};
  auto work = [&] {
    while (true) {
      auto const i = next.fetch_add(1U);
      if (i >= n) {
        return;
      }
      try {
        fn(i);
      } catch (...) {
        auto const lock = std::scoped_lock{failure_mutex};
        if (!failure) {
          failure = std::current_exception();
        }
        next = n;
        return;
      }
    }
  };

  {
    auto pool = std::vector<std::jthread>{};
    pool.reserve(threads);
    for (auto t = 0U; t != threads; ++t) {
      pool.emplace_back(work);
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

}  // namespace rtc
