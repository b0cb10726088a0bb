#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nlinr/tensor.hpp"

namespace nlinr::inr {

/// Sine-activated coordinate network mapping a scalar index to a factor row.
/// weights[0] is W x 1, hidden layers W x W, the last layer r x W and linear.
/// Hidden activations are sin(omega * z); there are no bias terms.
struct FactorNet {
    std::vector<Matrix> weights;
    double omega = 30.0;

    int depth() const { return static_cast<int>(weights.size()); }
    int64_t out_dim() const { return weights.back().rows; }
};

/// Standard sine-network initialization: first layer uniform in
/// [-1/fan_in, 1/fan_in], later layers uniform in +-sqrt(6/fan_in)/omega.
FactorNet init_siren(int64_t out_rank, int width, int depth, double omega, uint64_t seed);

/// Evaluate the net at normalized coordinates (i+1)/n for i = 0..n-1,
/// producing the n x r factor matrix.
Matrix factor_matrix(const FactorNet& net, int64_t n);

/// Tucker assembly: core contracted with one factor matrix per mode.
DenseTensor tucker_assemble(const DenseTensor& core, const std::vector<Matrix>& factors);

/// Adjoints of tucker_assemble: gradient of <g, assemble(core, factors)> with
/// respect to the core (returned) and, when `dU` is non-null, each factor
/// (accumulated into dU[d]).
DenseTensor tucker_backward(const DenseTensor& g, const DenseTensor& core,
                            const std::vector<Matrix>& factors, std::vector<Matrix>* dU);

/// Backpropagate a factor-matrix gradient (n x r) into the net weights;
/// contributions are accumulated into `dW` (same shapes as net.weights).
void factor_net_backward(const FactorNet& net, int64_t n, const Matrix& dU, std::vector<Matrix>& dW);

/// Parameters of the nonlocal background model: L unshared core tensors plus
/// four factor nets shared across groups. extents = (p, p, frames, S+1).
struct InrParameters {
    std::vector<DenseTensor> cores;
    std::array<FactorNet, 4> factors;
    std::array<int64_t, 4> extents{};

    int64_t groups() const { return static_cast<int64_t>(cores.size()); }
    std::array<int64_t, 4> ranks() const;
};

struct InrConfig {
    std::array<int64_t, 4> ranks{8, 8, 6, 4};  // clipped to the extents
    int width = 128;
    int depth = 3;
    double omega = 30.0;
};

InrParameters init_parameters(int64_t groups, const std::array<int64_t, 4>& extents,
                              const InrConfig& cfg, uint64_t seed);

/// The full 5-way background tensor (groups x p x p x frames x S+1); factor
/// matrices are computed once and shared by every group.
DenseTensor assemble_background(const InrParameters& theta);

/// Gradient bundle mirroring InrParameters shapes.
struct InrGradients {
    std::vector<DenseTensor> cores;
    std::array<std::vector<Matrix>, 4> factors;
};

InrGradients zeros_like(const InrParameters& theta);

struct LossTerms {
    double total = 0.0;
    double data = 0.0;
    double tv = 0.0;
};

/// Loss (rho/2)*||target - B||_F^2 + phi * TV(B) with
/// TV(B) = sum charb(diff_x B) + sum charb(diff_y B) + eta * sum charb(diff_t B),
/// charb(x) = sqrt(x^2 + 1e-6). Differences act on the patch spatial axes and
/// the frame axis of each group. When `grads` is non-null it receives exact
/// reverse-mode derivatives for every core and factor weight.
LossTerms loss_and_grad(const InrParameters& theta, const DenseTensor& target, double rho,
                        double phi, double eta, InrGradients* grads);

constexpr double kCharbonnierEps = 1e-6;

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    InrGradients m, v;
    int64_t step = 0;
    AdamConfig cfg;
};

AdamState make_adam_state(const InrParameters& theta, const AdamConfig& cfg);

/// One Adam update with bias correction, applied in place.
void adam_step(InrParameters& theta, const InrGradients& grads, AdamState& state);

/// Elementwise Adam on a raw array; shared by every optimizer in the library.
void adam_apply(double* p, const double* g, double* m, double* v, int64_t n,
                const AdamConfig& cfg, int64_t step);

// Checkpoint: text manifest (shapes, omega, seed) followed by the cores and
// weight matrices as concatenated NLT1 records.
void save_checkpoint(const std::string& path, const InrParameters& theta, uint64_t seed);
InrParameters load_checkpoint(const std::string& path, uint64_t* seed = nullptr);

}  // namespace nlinr::inr
