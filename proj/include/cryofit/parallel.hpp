#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace cryofit {

// Process-wide worker count used by the parallel kernels. Results never
// depend on this value: work is partitioned into fixed blocks and every
// reduction combines block partials in index order.
void set_num_threads(int n);
int num_threads();

// Calls body(begin, end) over [0, n) split into contiguous ranges.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

// Deterministic sum of f(i) for i in [0, n). Partials are formed over fixed
// blocks of `block` indices and combined by pairwise reduction, so the
// value is identical for every thread count.
double deterministic_sum(std::size_t n, const std::function<double(std::size_t)>& f,
                         std::size_t block = 4096);

double pairwise_sum(std::span<const double> values);

}  // namespace cryofit
