#pragma once

#include <cstddef>
#include <functional>

namespace morsdp {

// Effective worker count: the override set via set_thread_count (CLI flag),
// else the MORSDP_THREADS environment variable, else hardware concurrency.
int thread_count();
void set_thread_count(int n);  // n <= 0 restores the default resolution

// Runs fn(begin, end) over disjoint chunks of [0, n), possibly from multiple
// threads. Chunk boundaries depend only on n and the worker count, and
// workers write disjoint slots, so results are deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace morsdp
