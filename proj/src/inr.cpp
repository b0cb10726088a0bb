#include "nlinr/inr.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "nlinr/nlt1.hpp"
#include "nlinr/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nlinr::inr {

FactorNet init_siren(int64_t out_rank, int width, int depth, double omega, uint64_t seed) {
    if (out_rank < 1 || width < 1 || depth < 1) throw std::invalid_argument("init_siren: bad layer spec");
    FactorNet net;
    net.omega = omega;
    Rng rng(seed);
    for (int m = 0; m < depth; ++m) {
        const int64_t rows = (m == depth - 1) ? out_rank : width;
        const int64_t cols = (m == 0) ? 1 : width;
        const double fan_in = static_cast<double>(cols);
        const double c = (m == 0) ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / omega;
        Matrix w(rows, cols);
        for (double& v : w.a) v = rng.uniform(-c, c);
        net.weights.push_back(std::move(w));
    }
    return net;
}

namespace {

// forward pass at one coordinate; keeps pre-activations for the backward pass
void net_forward(const FactorNet& net, double x, std::vector<std::vector<double>>& acts,
                 std::vector<std::vector<double>>& pre) {
    const int M = net.depth();
    acts.assign(static_cast<size_t>(M), {});
    pre.assign(static_cast<size_t>(M), {});
    std::vector<double> in{x};
    for (int m = 0; m < M; ++m) {
        const Matrix& w = net.weights[static_cast<size_t>(m)];
        std::vector<double> z(static_cast<size_t>(w.rows), 0.0);
        for (int64_t r = 0; r < w.rows; ++r) {
            double s = 0.0;
            for (int64_t c = 0; c < w.cols; ++c) s += w(r, c) * in[static_cast<size_t>(c)];
            z[static_cast<size_t>(r)] = s;
        }
        pre[static_cast<size_t>(m)] = z;
        if (m == M - 1) {
            acts[static_cast<size_t>(m)] = z;  // linear output layer
        } else {
            std::vector<double> a(z.size());
            for (size_t i = 0; i < z.size(); ++i) a[i] = std::sin(net.omega * z[i]);
            acts[static_cast<size_t>(m)] = std::move(a);
        }
        in = acts[static_cast<size_t>(m)];
    }
}

}  // namespace

Matrix factor_matrix(const FactorNet& net, int64_t n) {
    if (n < 1) throw std::invalid_argument("factor_matrix: n must be >= 1");
    Matrix u(n, net.out_dim());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t i = 0; i < n; ++i) {
        std::vector<std::vector<double>> acts, pre;
        net_forward(net, static_cast<double>(i + 1) / static_cast<double>(n), acts, pre);
        const std::vector<double>& out = acts.back();
        for (int64_t r = 0; r < u.cols; ++r) u(i, r) = out[static_cast<size_t>(r)];
    }
    return u;
}

void factor_net_backward(const FactorNet& net, int64_t n, const Matrix& dU, std::vector<Matrix>& dW) {
    const int M = net.depth();
    if (dU.rows != n || dU.cols != net.out_dim())
        throw std::invalid_argument("factor_net_backward: gradient shape mismatch");
    // rows are cheap; accumulate serially so results do not depend on threads
    std::vector<std::vector<double>> acts, pre;
    for (int64_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i + 1) / static_cast<double>(n);
        net_forward(net, x, acts, pre);
        std::vector<double> dz(static_cast<size_t>(net.out_dim()));
        for (int64_t r = 0; r < dU.cols; ++r) dz[static_cast<size_t>(r)] = dU(i, r);
        for (int m = M - 1; m >= 0; --m) {
            const Matrix& w = net.weights[static_cast<size_t>(m)];
            const std::vector<double> in = (m == 0) ? std::vector<double>{x} : acts[static_cast<size_t>(m - 1)];
            Matrix& g = dW[static_cast<size_t>(m)];
            for (int64_t r = 0; r < w.rows; ++r)
                for (int64_t c = 0; c < w.cols; ++c)
                    g(r, c) += dz[static_cast<size_t>(r)] * in[static_cast<size_t>(c)];
            if (m == 0) break;
            std::vector<double> din(static_cast<size_t>(w.cols), 0.0);
            for (int64_t r = 0; r < w.rows; ++r)
                for (int64_t c = 0; c < w.cols; ++c)
                    din[static_cast<size_t>(c)] += w(r, c) * dz[static_cast<size_t>(r)];
            // chain through the sine of the previous layer
            const std::vector<double>& zprev = pre[static_cast<size_t>(m - 1)];
            dz.assign(din.size(), 0.0);
            for (size_t c = 0; c < din.size(); ++c)
                dz[c] = din[c] * net.omega * std::cos(net.omega * zprev[c]);
        }
    }
}

DenseTensor tucker_assemble(const DenseTensor& core, const std::vector<Matrix>& factors) {
    if (static_cast<int>(factors.size()) != core.ndim())
        throw std::invalid_argument("tucker_assemble: one factor per mode required");
    DenseTensor t = core;
    for (int d = 0; d < core.ndim(); ++d) {
        if (factors[static_cast<size_t>(d)].cols != t.dims[d])
            throw std::invalid_argument("tucker_assemble: rank/extent mismatch");
        t = mode_product(t, factors[static_cast<size_t>(d)], d);
    }
    return t;
}

DenseTensor tucker_backward(const DenseTensor& g, const DenseTensor& core,
                            const std::vector<Matrix>& factors, std::vector<Matrix>* dU) {
    const int D = core.ndim();
    // core gradient: contract g with every factor transposed
    DenseTensor dcore = g;
    for (int d = 0; d < D; ++d) dcore = mode_product(dcore, transpose(factors[static_cast<size_t>(d)]), d);
    if (dU) {
        for (int d = 0; d < D; ++d) {
            // partial assembly leaving mode d in rank space
            DenseTensor y = core;
            for (int e = 0; e < D; ++e)
                if (e != d) y = mode_product(y, factors[static_cast<size_t>(e)], e);
            const Matrix gu = unfold(g, d);
            const Matrix yu = unfold(y, d);
            Matrix contrib = matmul(gu, transpose(yu));
            Matrix& acc = (*dU)[static_cast<size_t>(d)];
            for (size_t i = 0; i < acc.a.size(); ++i) acc.a[i] += contrib.a[i];
        }
    }
    return dcore;
}

std::array<int64_t, 4> InrParameters::ranks() const {
    std::array<int64_t, 4> r{};
    for (int d = 0; d < 4; ++d) r[static_cast<size_t>(d)] = cores.front().dims[d];
    return r;
}

InrParameters init_parameters(int64_t groups, const std::array<int64_t, 4>& extents,
                              const InrConfig& cfg, uint64_t seed) {
    if (groups < 1) throw std::invalid_argument("init_parameters: need at least one group");
    InrParameters theta;
    theta.extents = extents;
    std::array<int64_t, 4> r;
    for (int d = 0; d < 4; ++d) {
        r[static_cast<size_t>(d)] = std::min(cfg.ranks[static_cast<size_t>(d)], extents[static_cast<size_t>(d)]);
        if (r[static_cast<size_t>(d)] < 1) throw std::invalid_argument("init_parameters: rank < 1");
        theta.factors[static_cast<size_t>(d)] =
            init_siren(r[static_cast<size_t>(d)], cfg.width, cfg.depth, cfg.omega, mix_seed(seed, static_cast<uint64_t>(d)));
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(r[0] * r[1] * r[2] * r[3]));
    for (int64_t l = 0; l < groups; ++l) {
        DenseTensor c({r[0], r[1], r[2], r[3]});
        Rng rng(mix_seed(seed, 100 + static_cast<uint64_t>(l)));
        for (double& v : c.data) v = rng.uniform(-scale, scale);
        theta.cores.push_back(std::move(c));
    }
    return theta;
}

namespace {

std::vector<Matrix> shared_factors(const InrParameters& theta) {
    std::vector<Matrix> u(4);
    for (int d = 0; d < 4; ++d)
        u[static_cast<size_t>(d)] = factor_matrix(theta.factors[static_cast<size_t>(d)],
                                                  theta.extents[static_cast<size_t>(d)]);
    return u;
}

}  // namespace

DenseTensor assemble_background(const InrParameters& theta) {
    const std::vector<Matrix> u = shared_factors(theta);
    const int64_t L = theta.groups();
    const std::array<int64_t, 4>& n = theta.extents;
    DenseTensor b({L, n[0], n[1], n[2], n[3]});
    const int64_t group_len = n[0] * n[1] * n[2] * n[3];
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t l = 0; l < L; ++l) {
        const DenseTensor g = tucker_assemble(theta.cores[static_cast<size_t>(l)], u);
        double* dst = b.data.data() + l * group_len;
        for (int64_t i = 0; i < group_len; ++i) dst[i] = g.data[static_cast<size_t>(i)];
    }
    return b;
}

InrGradients zeros_like(const InrParameters& theta) {
    InrGradients g;
    for (const DenseTensor& c : theta.cores) g.cores.emplace_back(c.dims);
    for (int d = 0; d < 4; ++d)
        for (const Matrix& w : theta.factors[static_cast<size_t>(d)].weights)
            g.factors[static_cast<size_t>(d)].emplace_back(w.rows, w.cols);
    return g;
}

namespace {

// per-group data + smoothed-TV loss and dLoss/dB for one group tensor
struct GroupLoss {
    double data = 0.0;
    double tv = 0.0;
};

GroupLoss group_loss_grad(const DenseTensor& bg, const double* target, double rho, double phi,
                          double eta, DenseTensor* gout) {
    const int64_t n = bg.size();
    GroupLoss out;
    double data = 0.0;
    if (gout) *gout = DenseTensor(bg.dims);
    for (int64_t i = 0; i < n; ++i) {
        const double r = bg[i] - target[i];
        data += r * r;
        if (gout) (*gout)[i] = rho * r;
    }
    out.data = 0.5 * rho * data;
    if (phi > 0.0) {
        const double w[3] = {phi, phi, phi * eta};
        for (int axis = 0; axis < 3; ++axis) {
            const DenseTensor d = forward_diff(bg, axis);
            double tv = 0.0;
            DenseTensor s(bg.dims);
            for (int64_t i = 0; i < n; ++i) {
                const double root = std::sqrt(d[i] * d[i] + kCharbonnierEps);
                tv += root;
                if (gout) s[i] = w[axis] * d[i] / root;
            }
            out.tv += w[axis] * tv;
            if (gout) {
                // adjoint of the forward difference: g[j] += s[j-1] - s[j]
                int64_t left = 1, mid = bg.dims[axis], right = 1;
                for (int k = 0; k < axis; ++k) left *= bg.dims[k];
                for (int k = axis + 1; k < bg.ndim(); ++k) right *= bg.dims[k];
                for (int64_t l = 0; l < left; ++l)
                    for (int64_t m = 0; m < mid; ++m) {
                        double* gd = gout->data.data() + (l * mid + m) * right;
                        const double* sm = s.data.data() + (l * mid + m) * right;
                        const double* sp = (m > 0) ? s.data.data() + (l * mid + m - 1) * right : nullptr;
                        for (int64_t rr = 0; rr < right; ++rr)
                            gd[rr] += (sp ? sp[rr] : 0.0) - sm[rr];
                    }
            }
        }
    }
    return out;
}

}  // namespace

LossTerms loss_and_grad(const InrParameters& theta, const DenseTensor& target, double rho,
                        double phi, double eta, InrGradients* grads) {
    const int64_t L = theta.groups();
    const std::array<int64_t, 4>& n = theta.extents;
    const std::vector<int64_t> want{L, n[0], n[1], n[2], n[3]};
    if (target.dims != want) throw std::invalid_argument("loss_and_grad: target shape mismatch");
    if (rho < 0.0 || phi < 0.0) throw std::invalid_argument("loss_and_grad: rho and phi must be >= 0");

    const std::vector<Matrix> u = shared_factors(theta);
    const int64_t group_len = n[0] * n[1] * n[2] * n[3];

    std::vector<GroupLoss> loss_per_group(static_cast<size_t>(L));
    // per-group factor-gradient partials, combined afterwards in group order
    std::vector<std::vector<Matrix>> du_partial;
    if (grads) {
        *grads = zeros_like(theta);
        du_partial.assign(static_cast<size_t>(L), {});
    }

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t l = 0; l < L; ++l) {
        const DenseTensor& core = theta.cores[static_cast<size_t>(l)];
        const DenseTensor bg = tucker_assemble(core, u);
        DenseTensor gtensor;
        loss_per_group[static_cast<size_t>(l)] =
            group_loss_grad(bg, target.data.data() + l * group_len, rho, phi, eta,
                            grads ? &gtensor : nullptr);
        if (grads) {
            std::vector<Matrix> du;
            for (int d = 0; d < 4; ++d) du.emplace_back(u[static_cast<size_t>(d)].rows, u[static_cast<size_t>(d)].cols);
            grads->cores[static_cast<size_t>(l)] = tucker_backward(gtensor, core, u, &du);
            du_partial[static_cast<size_t>(l)] = std::move(du);
        }
    }

    LossTerms terms;
    for (int64_t l = 0; l < L; ++l) {
        terms.data += loss_per_group[static_cast<size_t>(l)].data;
        terms.tv += loss_per_group[static_cast<size_t>(l)].tv;
    }
    terms.total = terms.data + terms.tv;
    if (!std::isfinite(terms.total)) throw numeric_error("loss_and_grad: non-finite loss");

    if (grads) {
        std::vector<Matrix> du_total;
        for (int d = 0; d < 4; ++d) du_total.emplace_back(u[static_cast<size_t>(d)].rows, u[static_cast<size_t>(d)].cols);
        for (int64_t l = 0; l < L; ++l)
            for (int d = 0; d < 4; ++d) {
                Matrix& acc = du_total[static_cast<size_t>(d)];
                const Matrix& part = du_partial[static_cast<size_t>(l)][static_cast<size_t>(d)];
                for (size_t i = 0; i < acc.a.size(); ++i) acc.a[i] += part.a[i];
            }
        for (int d = 0; d < 4; ++d)
            factor_net_backward(theta.factors[static_cast<size_t>(d)], n[static_cast<size_t>(d)],
                                du_total[static_cast<size_t>(d)], grads->factors[static_cast<size_t>(d)]);
    }
    return terms;
}

AdamState make_adam_state(const InrParameters& theta, const AdamConfig& cfg) {
    AdamState s;
    s.m = zeros_like(theta);
    s.v = zeros_like(theta);
    s.step = 0;
    s.cfg = cfg;
    return s;
}

void adam_apply(double* p, const double* g, double* m, double* v, int64_t n,
                const AdamConfig& cfg, int64_t step) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (int64_t i = 0; i < n; ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

void adam_step(InrParameters& theta, const InrGradients& grads, AdamState& state) {
    state.step += 1;
    for (size_t l = 0; l < theta.cores.size(); ++l)
        adam_apply(theta.cores[l].data.data(), grads.cores[l].data.data(),
                   state.m.cores[l].data.data(), state.v.cores[l].data.data(),
                   theta.cores[l].size(), state.cfg, state.step);
    for (int d = 0; d < 4; ++d)
        for (size_t w = 0; w < theta.factors[static_cast<size_t>(d)].weights.size(); ++w) {
            Matrix& pw = theta.factors[static_cast<size_t>(d)].weights[w];
            adam_apply(pw.a.data(), grads.factors[static_cast<size_t>(d)][w].a.data(),
                       state.m.factors[static_cast<size_t>(d)][w].a.data(),
                       state.v.factors[static_cast<size_t>(d)][w].a.data(), pw.size(), state.cfg,
                       state.step);
        }
}

// ---- checkpoint ------------------------------------------------------------

namespace {

DenseTensor matrix_as_tensor(const Matrix& m) {
    DenseTensor t({m.rows, m.cols});
    t.data = m.a;
    return t;
}

Matrix tensor_as_matrix(const DenseTensor& t) {
    if (t.ndim() != 2) throw io_error("checkpoint: expected a matrix record");
    Matrix m(t.dims[0], t.dims[1]);
    m.a = t.data;
    return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const InrParameters& theta, uint64_t seed) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open for write: " + path);
    os << "nlinr-checkpoint 1\n";
    os << "groups " << theta.groups() << "\n";
    os << "extents " << theta.extents[0] << " " << theta.extents[1] << " " << theta.extents[2]
       << " " << theta.extents[3] << "\n";
    const std::array<int64_t, 4> r = theta.ranks();
    os << "ranks " << r[0] << " " << r[1] << " " << r[2] << " " << r[3] << "\n";
    os << "seed " << seed << "\n";
    for (int d = 0; d < 4; ++d) {
        const FactorNet& net = theta.factors[static_cast<size_t>(d)];
        os << "net " << d << " depth " << net.depth();
        std::ostringstream om;
        om << net.omega;
        os << " omega " << om.str() << "\n";
    }
    os << "---\n";
    for (const DenseTensor& c : theta.cores) write_nlt1(os, c);
    for (int d = 0; d < 4; ++d)
        for (const Matrix& w : theta.factors[static_cast<size_t>(d)].weights)
            write_nlt1(os, matrix_as_tensor(w));
    if (!os) throw io_error("checkpoint: write failed: " + path);
}

InrParameters load_checkpoint(const std::string& path, uint64_t* seed) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("nlinr-checkpoint", 0) != 0)
        throw io_error("checkpoint: bad manifest: " + path);
    InrParameters theta;
    int64_t groups = 0;
    std::array<int, 4> depths{};
    std::array<double, 4> omegas{};
    while (std::getline(is, line) && line != "---") {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "groups") ls >> groups;
        else if (key == "extents")
            ls >> theta.extents[0] >> theta.extents[1] >> theta.extents[2] >> theta.extents[3];
        else if (key == "seed") {
            uint64_t s = 0;
            ls >> s;
            if (seed) *seed = s;
        } else if (key == "net") {
            int d = 0;
            std::string w1, w2;
            ls >> d >> w1;
            ls >> depths[static_cast<size_t>(d)] >> w2 >> omegas[static_cast<size_t>(d)];
        }
        // "ranks" is informational; shapes come from the records themselves
    }
    if (groups < 1) throw io_error("checkpoint: missing groups: " + path);
    for (int64_t l = 0; l < groups; ++l) theta.cores.push_back(read_nlt1(is));
    for (int d = 0; d < 4; ++d) {
        FactorNet net;
        net.omega = omegas[static_cast<size_t>(d)];
        for (int m = 0; m < depths[static_cast<size_t>(d)]; ++m)
            net.weights.push_back(tensor_as_matrix(read_nlt1(is)));
        theta.factors[static_cast<size_t>(d)] = std::move(net);
    }
    return theta;
}

}  // namespace nlinr::inr
