#pragma once

#include "nlinr/grouping.hpp"
#include "nlinr/inr.hpp"
#include "nlinr/tensor.hpp"

// Plain single-threaded implementations of the hot kernels, written as
// direct sums over indices. They are kept as the comparison baseline for the
// OpenMP kernels (tests assert agreement, tools/bench_kernels times both).
namespace nlinr::reference {

/// Direct-sum Tucker assembly: out[i..] = sum_r core[r..] * prod_d U_d(i_d, r_d).
DenseTensor tucker_assemble(const DenseTensor& core, const std::vector<Matrix>& factors);

DenseTensor assemble_background(const inr::InrParameters& theta);

inr::LossTerms loss_and_grad(const inr::InrParameters& theta, const DenseTensor& target,
                             double rho, double phi, double eta, inr::InrGradients* grads);

DenseTensor update_a(const DenseTensor& xp, const DenseTensor& tp, const DenseTensor& b,
                     const DenseTensor& lambda, double rho);

DenseTensor soft_threshold(const DenseTensor& x, double xi);

grouping::NonlocalIndex build_index(const std::vector<DenseTensor>& patches, int64_t s);

}  // namespace nlinr::reference
