#pragma once

#include <cstddef>
#include <functional>

namespace asbc {

// Resolves a requested worker count; <= 0 means hardware concurrency.
int effective_threads(int requested) noexcept;

// Runs fn(block_index, begin, end) over fixed-size blocks of [0, n).
// The block decomposition depends only on (n, block_size), never on the
// thread count, so per-block outputs reduced in block order afterwards are
// reproducible for a given seed regardless of --threads.
void parallel_blocks(std::size_t n, std::size_t block_size, int threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

// Convenience: one item per block.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace asbc
