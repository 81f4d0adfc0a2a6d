#ifndef CUSPLAB_PARALLEL_HPP
#define CUSPLAB_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"

namespace cusplab {

/// Worker count from the WORKERS environment variable, else the core count.
inline unsigned workers_from_env()
{
    const char* raw = std::getenv("WORKERS");
    if (raw == nullptr || *raw == '\0') {
        return std::max(1u, std::thread::hardware_concurrency());
    }
    char* end = nullptr;
    const long v = std::strtol(raw, &end, 10);
    if (end == raw || *end != '\0' || v <= 0) {
        throw ValidationError(std::string("WORKERS must be a positive integer, got '") + raw + "'");
    }
    return static_cast<unsigned>(v);
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// handled exactly once and results must be written to per-index slots, so
/// the outcome does not depend on the worker count. The exception of the
/// lowest failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn)
{
    if (n == 0) return;
    const std::size_t used = std::clamp<std::size_t>(workers, 1, n);
    std::vector<std::exception_ptr> errors(n);
    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (used == 1) {
        run_range(0, n);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(used);
        for (std::size_t w = 0; w < used; ++w) {
            pool.emplace_back(run_range, n * w / used, n * (w + 1) / used);
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

} // namespace cusplab

#endif // CUSPLAB_PARALLEL_HPP
