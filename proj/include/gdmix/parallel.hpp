#ifndef GDMIX_PARALLEL_HPP_
#define GDMIX_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace gdmix {

// Worker count honoring the SIMPLEX_THREADS environment variable
// (unset or 0 means hardware concurrency).
int worker_count();

// Runs fn(i) for i in [0, n). Workers own disjoint index ranges, so writing
// to per-index slots is race-free and the result is independent of the
// number of threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace gdmix

#endif // GDMIX_PARALLEL_HPP_
