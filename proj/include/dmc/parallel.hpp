#pragma once

// Episode-parallel map. The OpenMP kernel and the serial reference must
// produce identical result vectors: every episode writes only its own slot,
// and callers reduce in index order afterwards.

#include <exception>
#include <optional>
#include <type_traits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dmc {

template <class F>
auto map_episodes_serial(std::size_t n, F&& fn) -> std::vector<std::invoke_result_t<F&, std::size_t>> {
    std::vector<std::invoke_result_t<F&, std::size_t>> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.push_back(fn(k));
    return out;
}

/// Runs fn(k) for k in [0, n) on up to `workers` threads. If any episode
/// throws, the exception of the lowest failing index is rethrown.
template <class F>
auto map_episodes(std::size_t n, int workers, F&& fn) -> std::vector<std::invoke_result_t<F&, std::size_t>> {
    using R = std::invoke_result_t<F&, std::size_t>;
    if (workers <= 1 || n <= 1) return map_episodes_serial(n, fn);

    std::vector<std::optional<R>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
    for (long k = 0; k < count; ++k) {
        try {
            slots[k].emplace(fn(static_cast<std::size_t>(k)));
        } catch (...) {
            errors[k] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

}  // namespace dmc
