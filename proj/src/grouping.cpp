#include "nlinr/grouping.hpp"

#include <algorithm>
#include <cmath>

#include "nlinr/inr.hpp"
#include "nlinr/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nlinr::grouping {

PatchGrid PatchGrid::make(int64_t n1, int64_t n2, int64_t p) {
    if (p < 1) throw std::invalid_argument("PatchGrid: patch side must be >= 1");
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("PatchGrid: empty image");
    PatchGrid g;
    g.p = p;
    g.rows = (n1 + p - 1) / p;
    g.cols = (n2 + p - 1) / p;
    g.pad_rows = g.rows * p - n1;
    g.pad_cols = g.cols * p - n2;
    return g;
}

namespace {

// edge-inclusive mirror index, valid for any overshoot
int64_t mirror(int64_t i, int64_t n) {
    if (n == 1) return 0;
    const int64_t period = 2 * n;
    int64_t m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

}  // namespace

DenseTensor pad_reflect(const DenseTensor& x, const PatchGrid& grid) {
    if (x.ndim() != 3) throw std::invalid_argument("pad_reflect: need a 3-way tensor");
    const int64_t n1 = x.dims[0], n2 = x.dims[1], n3 = x.dims[2];
    const int64_t m1 = grid.rows * grid.p, m2 = grid.cols * grid.p;
    if (m1 == n1 && m2 == n2) return x;
    DenseTensor out({m1, m2, n3});
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t i = 0; i < m1; ++i) {
        const int64_t si = mirror(i, n1);
        for (int64_t j = 0; j < m2; ++j) {
            const int64_t sj = mirror(j, n2);
            const double* src = x.data.data() + (si * n2 + sj) * n3;
            double* dst = out.data.data() + (i * m2 + j) * n3;
            for (int64_t f = 0; f < n3; ++f) dst[f] = src[f];
        }
    }
    return out;
}

std::vector<DenseTensor> split_patches(const DenseTensor& x, const PatchGrid& grid) {
    if (x.ndim() != 3) throw std::invalid_argument("split_patches: need a 3-way tensor");
    if (x.dims[0] != grid.rows * grid.p || x.dims[1] != grid.cols * grid.p)
        throw std::invalid_argument("split_patches: tensor is not padded to the grid");
    const int64_t p = grid.p, n2 = x.dims[1], n3 = x.dims[2];
    std::vector<DenseTensor> patches(static_cast<size_t>(grid.patches()));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t l = 0; l < grid.patches(); ++l) {
        const int64_t pr = l / grid.cols, pc = l % grid.cols;
        DenseTensor t({p, p, n3});
        for (int64_t i = 0; i < p; ++i)
            for (int64_t j = 0; j < p; ++j) {
                const double* src = x.data.data() + ((pr * p + i) * n2 + pc * p + j) * n3;
                double* dst = t.data.data() + (i * p + j) * n3;
                for (int64_t f = 0; f < n3; ++f) dst[f] = src[f];
            }
        patches[static_cast<size_t>(l)] = std::move(t);
    }
    return patches;
}

DenseTensor stitch_patches(const std::vector<DenseTensor>& patches, const PatchGrid& grid) {
    if (static_cast<int64_t>(patches.size()) != grid.patches())
        throw std::invalid_argument("stitch_patches: patch count mismatch");
    const int64_t p = grid.p, n3 = patches.front().dims[2];
    DenseTensor x({grid.rows * p, grid.cols * p, n3});
    const int64_t n2 = x.dims[1];
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t l = 0; l < grid.patches(); ++l) {
        const int64_t pr = l / grid.cols, pc = l % grid.cols;
        const DenseTensor& t = patches[static_cast<size_t>(l)];
        for (int64_t i = 0; i < p; ++i)
            for (int64_t j = 0; j < p; ++j) {
                const double* src = t.data.data() + (i * p + j) * n3;
                double* dst = x.data.data() + ((pr * p + i) * n2 + pc * p + j) * n3;
                for (int64_t f = 0; f < n3; ++f) dst[f] = src[f];
            }
    }
    return x;
}

std::vector<int64_t> top_s_similar(const std::vector<DenseTensor>& patches, int64_t l, int64_t s) {
    const int64_t L = static_cast<int64_t>(patches.size());
    if (l < 0 || l >= L) throw std::invalid_argument("top_s_similar: key index out of range");
    if (s < 0 || s > L - 1) throw std::invalid_argument("top_s_similar: s must be in [0, L-1]");
    std::vector<std::pair<double, int64_t>> dist;
    dist.reserve(static_cast<size_t>(L - 1));
    const DenseTensor& key = patches[static_cast<size_t>(l)];
    for (int64_t j = 0; j < L; ++j) {
        if (j == l) continue;
        const DenseTensor& q = patches[static_cast<size_t>(j)];
        double d2 = 0.0;
        for (int64_t i = 0; i < key.size(); ++i) {
            const double d = key[i] - q[i];
            d2 += d * d;
        }
        dist.emplace_back(d2, j);
    }
    std::sort(dist.begin(), dist.end());  // ties fall back to ascending index
    std::vector<int64_t> out(static_cast<size_t>(s));
    for (int64_t i = 0; i < s; ++i) out[static_cast<size_t>(i)] = dist[static_cast<size_t>(i)].second;
    return out;
}

NonlocalIndex build_index(const std::vector<DenseTensor>& coarse_patches, int64_t s) {
    const int64_t L = static_cast<int64_t>(coarse_patches.size());
    NonlocalIndex idx;
    idx.groups.resize(static_cast<size_t>(L));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t l = 0; l < L; ++l)
        idx.groups[static_cast<size_t>(l)] = top_s_similar(coarse_patches, l, s);
    return idx;
}

DenseTensor build_group_tensor(const std::vector<DenseTensor>& patches, const NonlocalIndex& index) {
    const int64_t L = static_cast<int64_t>(patches.size());
    if (static_cast<int64_t>(index.groups.size()) != L)
        throw std::invalid_argument("build_group_tensor: index size mismatch");
    const int64_t p = patches.front().dims[0], n3 = patches.front().dims[2];
    const int64_t slots = index.similar() + 1;
    DenseTensor tp({L, p, p, n3, slots});
    const int64_t patch_len = p * p * n3;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t l = 0; l < L; ++l) {
        for (int64_t m = 0; m < slots; ++m) {
            const int64_t src = m == 0 ? l : index.groups[static_cast<size_t>(l)][static_cast<size_t>(m - 1)];
            const DenseTensor& patch = patches[static_cast<size_t>(src)];
            // group layout: (l, i, j, f, m) with m fastest
            for (int64_t q = 0; q < patch_len; ++q)
                tp.data[static_cast<size_t>((l * patch_len + q) * slots + m)] = patch[q];
        }
    }
    return tp;
}

DenseTensor scatter_back(const DenseTensor& tp, const NonlocalIndex& index, const PatchGrid& grid,
                         const std::array<int64_t, 3>& dims, bool slot0_only) {
    if (tp.ndim() != 5) throw std::invalid_argument("scatter_back: need a 5-way group tensor");
    const int64_t L = tp.dims[0], p = tp.dims[1], n3 = tp.dims[3], slots = tp.dims[4];
    if (L != grid.patches() || p != grid.p || tp.dims[2] != p)
        throw std::invalid_argument("scatter_back: tensor inconsistent with grid");
    if (dims[0] + grid.pad_rows != grid.rows * p || dims[1] + grid.pad_cols != grid.cols * p || dims[2] != n3)
        throw std::invalid_argument("scatter_back: output dims inconsistent with grid");

    // occurrences of each base patch: its own slot 0, plus referencing slots
    std::vector<std::vector<std::pair<int64_t, int64_t>>> occ(static_cast<size_t>(L));
    for (int64_t l = 0; l < L; ++l) occ[static_cast<size_t>(l)].emplace_back(l, 0);
    if (!slot0_only)
        for (int64_t l = 0; l < L; ++l)
            for (int64_t m = 1; m < slots; ++m)
                occ[static_cast<size_t>(index.groups[static_cast<size_t>(l)][static_cast<size_t>(m - 1)])]
                    .emplace_back(l, m);

    const int64_t patch_len = p * p * n3;
    std::vector<DenseTensor> averaged(static_cast<size_t>(L));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t j = 0; j < L; ++j) {
        DenseTensor acc({p, p, n3});
        for (const auto& [l, m] : occ[static_cast<size_t>(j)])
            for (int64_t q = 0; q < patch_len; ++q)
                acc[q] += tp.data[static_cast<size_t>((l * patch_len + q) * slots + m)];
        const double inv = 1.0 / static_cast<double>(occ[static_cast<size_t>(j)].size());
        for (int64_t q = 0; q < patch_len; ++q) acc[q] *= inv;
        averaged[static_cast<size_t>(j)] = std::move(acc);
    }

    const DenseTensor padded = stitch_patches(averaged, grid);
    if (grid.pad_rows == 0 && grid.pad_cols == 0) return padded;
    DenseTensor out({dims[0], dims[1], dims[2]});
    const int64_t m2 = padded.dims[1];
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t i = 0; i < dims[0]; ++i)
        for (int64_t j = 0; j < dims[1]; ++j) {
            const double* src = padded.data.data() + (i * m2 + j) * n3;
            double* dst = out.data.data() + (i * dims[1] + j) * n3;
            for (int64_t f = 0; f < n3; ++f) dst[f] = src[f];
        }
    return out;
}

// ---- coarse background fit -------------------------------------------------

namespace {

struct CoarseModel {
    DenseTensor core;
    std::array<inr::FactorNet, 3> nets;
    std::array<int64_t, 3> extents{};

    std::vector<Matrix> factors() const {
        std::vector<Matrix> u(3);
        for (int d = 0; d < 3; ++d)
            u[static_cast<size_t>(d)] = inr::factor_matrix(nets[static_cast<size_t>(d)],
                                                           extents[static_cast<size_t>(d)]);
        return u;
    }
};

}  // namespace

CoarseFitResult fit_coarse_background(const DenseTensor& x, const LrtfrConfig& cfg) {
    if (x.ndim() != 3) throw std::invalid_argument("fit_coarse_background: need a 3-way tensor");
    if (cfg.iters < 1) throw std::invalid_argument("fit_coarse_background: iters must be >= 1");

    CoarseModel model;
    std::array<int64_t, 3> r;
    for (int d = 0; d < 3; ++d) {
        model.extents[static_cast<size_t>(d)] = x.dims[d];
        r[static_cast<size_t>(d)] = std::min(cfg.ranks[static_cast<size_t>(d)], x.dims[d]);
        model.nets[static_cast<size_t>(d)] = inr::init_siren(
            r[static_cast<size_t>(d)], cfg.width, cfg.depth, cfg.omega, mix_seed(cfg.seed, 40 + static_cast<uint64_t>(d)));
    }
    model.core = DenseTensor({r[0], r[1], r[2]});
    {
        Rng rng(mix_seed(cfg.seed, 50));
        const double scale = 1.0 / std::sqrt(static_cast<double>(r[0] * r[1] * r[2]));
        for (double& v : model.core.data) v = rng.uniform(-scale, scale);
    }

    // flat Adam state over (core, net weights) in a fixed order
    std::vector<std::pair<double*, int64_t>> params;
    params.emplace_back(model.core.data.data(), model.core.size());
    for (int d = 0; d < 3; ++d)
        for (Matrix& w : model.nets[static_cast<size_t>(d)].weights) params.emplace_back(w.a.data(), w.size());
    int64_t total = 0;
    for (const auto& [ptr, n] : params) total += n;
    std::vector<double> m(static_cast<size_t>(total), 0.0), v(static_cast<size_t>(total), 0.0);
    inr::AdamConfig adam_cfg;
    adam_cfg.lr = cfg.lr;

    const int64_t n = x.size();
    DenseTensor best_bg;
    double best_loss = 0.0, init_loss = 0.0;
    CoarseModel best = model;

    const auto eval = [&](DenseTensor* dcore, std::vector<Matrix>* du, DenseTensor* bg_out) {
        const std::vector<Matrix> u = model.factors();
        DenseTensor bg = inr::tucker_assemble(model.core, u);
        double loss = 0.0;
        DenseTensor g;
        if (dcore) g = DenseTensor(bg.dims);
        for (int64_t i = 0; i < n; ++i) {
            const double res = bg[i] - x[i];
            const double root = std::sqrt(res * res + inr::kCharbonnierEps);
            loss += root;
            if (dcore) g[i] = res / root;
        }
        if (!std::isfinite(loss)) throw numeric_error("fit_coarse_background: non-finite loss");
        if (dcore) {
            du->clear();
            for (int d = 0; d < 3; ++d) du->emplace_back(u[static_cast<size_t>(d)].rows, u[static_cast<size_t>(d)].cols);
            *dcore = inr::tucker_backward(g, model.core, u, du);
        }
        if (bg_out) *bg_out = std::move(bg);
        return loss;
    };

    for (int it = 0; it <= cfg.iters; ++it) {
        DenseTensor dcore;
        std::vector<Matrix> du;
        const bool last = it == cfg.iters;
        const double loss = eval(last ? nullptr : &dcore, last ? nullptr : &du, nullptr);
        if (it == 0) init_loss = loss;
        if (it == 0 || loss < best_loss) {
            best_loss = loss;
            best = model;
        }
        if (last) break;

        // weight gradients from the factor-matrix gradients
        std::array<std::vector<Matrix>, 3> dw;
        for (int d = 0; d < 3; ++d) {
            for (const Matrix& w : model.nets[static_cast<size_t>(d)].weights)
                dw[static_cast<size_t>(d)].emplace_back(w.rows, w.cols);
            inr::factor_net_backward(model.nets[static_cast<size_t>(d)],
                                     model.extents[static_cast<size_t>(d)], du[static_cast<size_t>(d)],
                                     dw[static_cast<size_t>(d)]);
        }

        // flat gradient in the same fixed order as `params`
        std::vector<const double*> gptrs;
        gptrs.push_back(dcore.data.data());
        for (int d = 0; d < 3; ++d)
            for (const Matrix& w : dw[static_cast<size_t>(d)]) gptrs.push_back(w.a.data());

        const int64_t step = it + 1;
        int64_t off = 0;
        for (size_t pi = 0; pi < params.size(); ++pi) {
            inr::adam_apply(params[pi].first, gptrs[pi], m.data() + off, v.data() + off,
                            params[pi].second, adam_cfg, step);
            off += params[pi].second;
        }
    }

    model = best;
    {
        const std::vector<Matrix> u = model.factors();
        best_bg = inr::tucker_assemble(model.core, u);
        for (double& val : best_bg.data) val = std::min(1.0, std::max(0.0, val));
    }
    return CoarseFitResult{std::move(best_bg), init_loss, best_loss};
}

}  // namespace nlinr::grouping
