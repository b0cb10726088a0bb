#pragma once

#include <string>
#include <vector>

#include "nlinr/inr.hpp"
#include "nlinr/tensor.hpp"

namespace nlinr::admm {

struct SolverConfig {
    double lambda_sparse = 0.25;  // l1 weight on the target
    double phi = 1e-6;            // TV weight
    double eta = 1.0;             // temporal TV weight
    double rho0 = 0.01;
    double kappa = 1.05;
    int inner_steps = 10;   // Adam steps per outer iteration
    int max_outer = 150;
    double tol = 1e-3;      // relative-error stop threshold on the target iterate
    double primal_tol = 0.05;  // consensus gate ||A - B||_F / ||B||_F for stopping
    uint64_t seed = 0;

    inr::InrConfig inr;
    double adam_lr = 1e-3;

    std::string dump_dir;  // when non-empty: per-iteration NLT1 snapshots + re_history.csv

    void validate() const;
};

/// ADMM iterates. a, tp and lambda share the 5-way group-tensor shape.
struct AdmmState {
    DenseTensor a, tp, lambda;
    double rho = 0.0;
    int t = 0;
    std::vector<double> re_history;
};

/// Closed-form minimizer of ||xp - a - tp||_F^2 + (rho/2)||a - b + lambda||_F^2:
/// a = (2(xp - tp) + rho*(b - lambda)) / (2 + rho).
DenseTensor update_a(const DenseTensor& xp, const DenseTensor& tp, const DenseTensor& b,
                     const DenseTensor& lambda, double rho);

/// sign(x) * max(|x| - xi, 0); the proximal map of min_t (x-t)^2 + 2*xi*|t|.
double soft_threshold(double x, double xi);
DenseTensor soft_threshold(const DenseTensor& x, double xi);

/// Run `inner_steps` Adam iterations on the background subproblem with target
/// a + lambda; the parameters achieving the lowest observed loss are kept.
/// Returns that loss.
double update_theta(inr::InrParameters& theta, inr::AdamState& adam, const DenseTensor& a,
                    const DenseTensor& lambda, double rho, double phi, double eta, int inner_steps);

/// lambda += a - b; rho *= kappa.
void update_multiplier(AdmmState& state, const DenseTensor& b, double kappa);

struct SolveResult {
    DenseTensor background;   // 5-way B
    DenseTensor target;       // 5-way T
    std::vector<double> re_history;
    bool converged = false;
    int iterations = 0;
    inr::InrParameters theta;
};

/// Full four-step scheme on the group tensor xp (L x p x p x n3 x S+1).
SolveResult solve(const DenseTensor& xp, const SolverConfig& cfg);

}  // namespace nlinr::admm
