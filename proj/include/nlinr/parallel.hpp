#pragma once

namespace nlinr {

/// Set the worker thread count for all OpenMP kernels. 0 picks the
/// hardware default. Every kernel in this library is written so its
/// output is bit-identical for any thread count.
void set_num_threads(int n);

int max_threads();

}  // namespace nlinr
