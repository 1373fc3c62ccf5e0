#pragma once

#include <cstddef>
#include <functional>

namespace citeflux {

// Static block partition over [0, n). fn(i) may only write state owned by
// index i; with that discipline results are identical for every worker count.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace citeflux
