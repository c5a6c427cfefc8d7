#pragma once

#include <cstddef>
#include <functional>

namespace regs {

// Worker count for parallel_for. Defaults to REGS_THREADS when set,
// otherwise the hardware concurrency.
int num_threads();
void set_num_threads(int n);

// Runs body(i) for i in [0, n). Work is split into contiguous blocks;
// callers must not depend on which worker runs which index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace regs
