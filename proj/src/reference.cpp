#include "nlinr/reference.hpp"

#include <algorithm>
#include <cmath>

namespace nlinr::reference {

namespace {

// odometer over an index vector; returns false after the last combination
bool advance(std::vector<int64_t>& idx, const std::vector<int64_t>& dims) {
    for (int d = static_cast<int>(dims.size()) - 1; d >= 0; --d) {
        if (++idx[static_cast<size_t>(d)] < dims[static_cast<size_t>(d)]) return true;
        idx[static_cast<size_t>(d)] = 0;
    }
    return false;
}

int64_t flat_index(const std::vector<int64_t>& idx, const std::vector<int64_t>& dims) {
    int64_t f = 0;
    for (size_t d = 0; d < dims.size(); ++d) f = f * dims[d] + idx[d];
    return f;
}

}  // namespace

DenseTensor tucker_assemble(const DenseTensor& core, const std::vector<Matrix>& factors) {
    const int D = core.ndim();
    std::vector<int64_t> out_dims(static_cast<size_t>(D));
    for (int d = 0; d < D; ++d) out_dims[static_cast<size_t>(d)] = factors[static_cast<size_t>(d)].rows;
    DenseTensor out(out_dims);
    std::vector<int64_t> i(static_cast<size_t>(D), 0);
    do {
        double sum = 0.0;
        std::vector<int64_t> r(static_cast<size_t>(D), 0);
        do {
            double term = core[flat_index(r, core.dims)];
            for (int d = 0; d < D; ++d)
                term *= factors[static_cast<size_t>(d)](i[static_cast<size_t>(d)], r[static_cast<size_t>(d)]);
            sum += term;
        } while (advance(r, core.dims));
        out[flat_index(i, out_dims)] = sum;
    } while (advance(i, out_dims));
    return out;
}

DenseTensor assemble_background(const inr::InrParameters& theta) {
    std::vector<Matrix> u(4);
    for (int d = 0; d < 4; ++d)
        u[static_cast<size_t>(d)] =
            inr::factor_matrix(theta.factors[static_cast<size_t>(d)], theta.extents[static_cast<size_t>(d)]);
    const int64_t L = theta.groups();
    const std::array<int64_t, 4>& n = theta.extents;
    DenseTensor b({L, n[0], n[1], n[2], n[3]});
    const int64_t group_len = n[0] * n[1] * n[2] * n[3];
    for (int64_t l = 0; l < L; ++l) {
        const DenseTensor g = tucker_assemble(theta.cores[static_cast<size_t>(l)], u);
        std::copy(g.data.begin(), g.data.end(), b.data.begin() + l * group_len);
    }
    return b;
}

inr::LossTerms loss_and_grad(const inr::InrParameters& theta, const DenseTensor& target,
                             double rho, double phi, double eta, inr::InrGradients* grads) {
    std::vector<Matrix> u(4);
    for (int d = 0; d < 4; ++d)
        u[static_cast<size_t>(d)] =
            inr::factor_matrix(theta.factors[static_cast<size_t>(d)], theta.extents[static_cast<size_t>(d)]);
    const int64_t L = theta.groups();
    const std::array<int64_t, 4>& n = theta.extents;
    const std::vector<int64_t> gdims{n[0], n[1], n[2], n[3]};
    const int64_t group_len = n[0] * n[1] * n[2] * n[3];

    if (grads) *grads = inr::zeros_like(theta);
    std::vector<Matrix> du_total;
    if (grads)
        for (int d = 0; d < 4; ++d) du_total.emplace_back(u[static_cast<size_t>(d)].rows, u[static_cast<size_t>(d)].cols);

    inr::LossTerms terms;
    const double w[3] = {phi, phi, phi * eta};
    for (int64_t l = 0; l < L; ++l) {
        const DenseTensor& core = theta.cores[static_cast<size_t>(l)];
        const DenseTensor bg = tucker_assemble(core, u);
        const double* tgt = target.data.data() + l * group_len;

        DenseTensor g(gdims);
        for (int64_t q = 0; q < group_len; ++q) {
            const double res = bg[q] - tgt[q];
            terms.data += 0.5 * rho * res * res;
            g[q] = rho * res;
        }
        if (phi > 0.0) {
            for (int axis = 0; axis < 3; ++axis) {
                const DenseTensor d = forward_diff(bg, axis);
                DenseTensor s(gdims);
                for (int64_t q = 0; q < group_len; ++q) {
                    const double root = std::sqrt(d[q] * d[q] + inr::kCharbonnierEps);
                    terms.tv += w[axis] * root;
                    s[q] = w[axis] * d[q] / root;
                }
                // g[j] += s[j-1] - s[j] along `axis`, done index by index
                std::vector<int64_t> idx(4, 0);
                do {
                    const int64_t f = flat_index(idx, gdims);
                    double val = -s[f];
                    if (idx[static_cast<size_t>(axis)] > 0) {
                        std::vector<int64_t> prev = idx;
                        --prev[static_cast<size_t>(axis)];
                        val += s[flat_index(prev, gdims)];
                    }
                    g[f] += val;
                } while (advance(idx, gdims));
            }
        }
        if (grads) {
            // dcore by direct contraction
            DenseTensor& dcore = grads->cores[static_cast<size_t>(l)];
            std::vector<int64_t> r(4, 0);
            do {
                double sum = 0.0;
                std::vector<int64_t> i(4, 0);
                do {
                    double term = g[flat_index(i, gdims)];
                    for (int d = 0; d < 4; ++d) term *= u[static_cast<size_t>(d)](i[static_cast<size_t>(d)], r[static_cast<size_t>(d)]);
                    sum += term;
                } while (advance(i, gdims));
                dcore[flat_index(r, core.dims)] = sum;
            } while (advance(r, core.dims));

            // dU_d(i_d, r_d) by direct contraction over the other modes
            for (int d = 0; d < 4; ++d) {
                Matrix& du = du_total[static_cast<size_t>(d)];
                std::vector<int64_t> i(4, 0);
                do {
                    const double gv = g[flat_index(i, gdims)];
                    std::vector<int64_t> r4(4, 0);
                    do {
                        double term = core[flat_index(r4, core.dims)];
                        for (int e = 0; e < 4; ++e)
                            if (e != d)
                                term *= u[static_cast<size_t>(e)](i[static_cast<size_t>(e)], r4[static_cast<size_t>(e)]);
                        du(i[static_cast<size_t>(d)], r4[static_cast<size_t>(d)]) += gv * term;
                    } while (advance(r4, core.dims));
                } while (advance(i, gdims));
            }
        }
    }
    terms.total = terms.data + terms.tv;
    if (grads)
        for (int d = 0; d < 4; ++d)
            inr::factor_net_backward(theta.factors[static_cast<size_t>(d)], n[static_cast<size_t>(d)],
                                     du_total[static_cast<size_t>(d)], grads->factors[static_cast<size_t>(d)]);
    return terms;
}

DenseTensor update_a(const DenseTensor& xp, const DenseTensor& tp, const DenseTensor& b,
                     const DenseTensor& lambda, double rho) {
    DenseTensor a(xp.dims);
    for (int64_t i = 0; i < xp.size(); ++i)
        a[i] = (2.0 * (xp[i] - tp[i]) + rho * (b[i] - lambda[i])) / (2.0 + rho);
    return a;
}

DenseTensor soft_threshold(const DenseTensor& x, double xi) {
    DenseTensor t(x.dims);
    for (int64_t i = 0; i < x.size(); ++i) {
        const double m = std::fabs(x[i]) - xi;
        t[i] = m > 0.0 ? (x[i] > 0.0 ? m : -m) : 0.0;
    }
    return t;
}

grouping::NonlocalIndex build_index(const std::vector<DenseTensor>& patches, int64_t s) {
    grouping::NonlocalIndex idx;
    const int64_t L = static_cast<int64_t>(patches.size());
    idx.groups.resize(static_cast<size_t>(L));
    for (int64_t l = 0; l < L; ++l) {
        std::vector<std::pair<double, int64_t>> dist;
        for (int64_t j = 0; j < L; ++j) {
            if (j == l) continue;
            double d2 = 0.0;
            for (int64_t q = 0; q < patches[static_cast<size_t>(l)].size(); ++q) {
                const double d = patches[static_cast<size_t>(l)][q] - patches[static_cast<size_t>(j)][q];
                d2 += d * d;
            }
            dist.emplace_back(d2, j);
        }
        std::sort(dist.begin(), dist.end());
        for (int64_t k = 0; k < s; ++k) idx.groups[static_cast<size_t>(l)].push_back(dist[static_cast<size_t>(k)].second);
    }
    return idx;
}

}  // namespace nlinr::reference
