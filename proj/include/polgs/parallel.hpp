#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

#include <vector>
#include <cstddef>

namespace polgs {

inline void set_thread_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Deterministic parallel reduction: each row is summed left to right by one
// worker, row partials are added in row order on the calling thread. The
// result does not depend on the number of threads.
template <typename F>
double row_sum(int rows, int cols, F&& term) {
    std::vector<double> partial(rows, 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < rows; ++y) {
        double s = 0.0;
        for (int x = 0; x < cols; ++x) s += term(x, y);
        partial[y] = s;
    }
    double total = 0.0;
    for (int y = 0; y < rows; ++y) total += partial[y];
    return total;
}

} // namespace polgs
