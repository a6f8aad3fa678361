#include "smse/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace smse {

namespace {
std::atomic<std::size_t> g_threads{1};
thread_local bool t_inside = false;
}

void set_num_threads(std::size_t n) { g_threads = std::max<std::size_t>(1, n); }

std::size_t num_threads() { return g_threads; }

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = t_inside ? 1 : std::min(num_threads(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::size_t error_index = count;
    std::mutex mu;
    auto run = [&] {
        const bool was_inside = t_inside;
        t_inside = true;
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(mu);
                // Report the lowest failing index so errors are reproducible.
                if (i < error_index) {
                    error_index = i;
                    first_error = std::current_exception();
                }
            }
        }
        t_inside = was_inside;
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
        run();
    }
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace smse
