#include "morsdp/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace morsdp {

namespace {
std::atomic<int> g_override{0};

int resolve_default() {
    if (const char* env = std::getenv("MORSDP_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}
}  // namespace

int thread_count() {
    int o = g_override.load(std::memory_order_relaxed);
    return o > 0 ? o : resolve_default();
}

void set_thread_count(int n) { g_override.store(n > 0 ? n : 0, std::memory_order_relaxed); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    int workers = thread_count();
    if (workers <= 1 || n < 2048) {
        fn(0, n);
        return;
    }
    if (static_cast<std::size_t>(workers) > n) workers = static_cast<int>(n);
    std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) /
                        static_cast<std::size_t>(workers);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    auto guarded = [&fn, &first_error, &failed](std::size_t b, std::size_t e) {
        try {
            fn(b, e);
        } catch (...) {
            if (!failed.exchange(true)) first_error = std::current_exception();
        }
    };
    for (int w = 1; w < workers; ++w) {
        std::size_t b = static_cast<std::size_t>(w) * chunk;
        std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&guarded, b, e] { guarded(b, e); });
    }
    guarded(0, std::min(n, chunk));
    for (auto& t : pool) t.join();
    if (failed.load()) std::rethrow_exception(first_error);
}

}  // namespace morsdp
