#pragma once

// Parameter-sweep helpers: independent evaluations over an index range with an
// OpenMP-parallel kernel and a serial reference used by tests and benchmarks.

#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qgt {

template <typename T, typename F>
std::vector<T> serial_map(std::size_t count, F&& fn) {
    std::vector<T> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(fn(i));
    return out;
}

// jobs <= 0 uses the OpenMP default. Exceptions from workers are captured and
// the first one is rethrown on the calling thread.
template <typename T, typename F>
std::vector<T> parallel_map(std::size_t count, F&& fn, int jobs = 0) {
#ifdef _OPENMP
    std::vector<T> out(count);
    std::exception_ptr error;
    const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (long long i = 0; i < static_cast<long long>(count); ++i) {
        try {
            out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return out;
#else
    (void)jobs;
    return serial_map<T>(count, std::forward<F>(fn));
#endif
}

} // namespace qgt
