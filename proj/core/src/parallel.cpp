#include "asbc/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace asbc {

int effective_threads(int requested) noexcept {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_blocks(std::size_t n, std::size_t block_size, int threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (block_size == 0) block_size = 1;
  const std::size_t n_blocks = (n + block_size - 1) / block_size;
  const int workers = std::min<std::size_t>(
      static_cast<std::size_t>(std::max(1, effective_threads(threads))), n_blocks);

  auto run_block = [&](std::size_t b) {
    const std::size_t begin = b * block_size;
    const std::size_t end = std::min(n, begin + block_size);
    fn(b, begin, end);
  };

  if (workers <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
    return;
  }

  std::atomic<std::size_t> next_block{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t b = next_block.fetch_add(1);
      if (b >= n_blocks) return;
      try {
        run_block(b);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (first_error) std::rethrow_exception(first_error);
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  parallel_blocks(n, 1, threads,
                  [&](std::size_t, std::size_t begin, std::size_t) { fn(begin); });
}

}  // namespace asbc
