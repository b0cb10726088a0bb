#include "nlinr/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nlinr::flow {

namespace {

int64_t clampi(int64_t v, int64_t lo, int64_t hi) { return std::min(hi, std::max(lo, v)); }

double sample_mirror(const Matrix& img, int64_t y, int64_t x) {
    // edge-inclusive mirror, valid for arbitrary overshoot
    const auto wrap = [](int64_t i, int64_t n) {
        if (n == 1) return int64_t{0};
        const int64_t period = 2 * n;
        int64_t m = i % period;
        if (m < 0) m += period;
        return m < n ? m : period - 1 - m;
    };
    return img(wrap(y, img.rows), wrap(x, img.cols));
}

double sample_bilinear(const Matrix& img, double y, double x) {
    y = std::min(static_cast<double>(img.rows - 1), std::max(0.0, y));
    x = std::min(static_cast<double>(img.cols - 1), std::max(0.0, x));
    const int64_t y0 = static_cast<int64_t>(y);
    const int64_t x0 = static_cast<int64_t>(x);
    const int64_t y1 = std::min(img.rows - 1, y0 + 1);
    const int64_t x1 = std::min(img.cols - 1, x0 + 1);
    const double fy = y - y0, fx = x - x0;
    return (1 - fy) * ((1 - fx) * img(y0, x0) + fx * img(y0, x1)) +
           fy * ((1 - fx) * img(y1, x0) + fx * img(y1, x1));
}

// Quadratic expansion f(p+o) ~ c + b.o + o'Ao around every pixel.
// With a full (mirrored) window the weighted Gram matrix is the same for all
// pixels, so it is inverted once.
struct PolyExpansion {
    Matrix bx, by;        // linear coefficients
    Matrix axx, axy, ayy; // quadratic coefficients (axy already halved)
};

void solve6(std::array<std::array<double, 6>, 6> g, std::array<double, 6>& rhs) {
    for (int col = 0; col < 6; ++col) {
        int piv = col;
        for (int r = col + 1; r < 6; ++r)
            if (std::fabs(g[r][col]) > std::fabs(g[piv][col])) piv = r;
        std::swap(g[col], g[piv]);
        std::swap(rhs[col], rhs[piv]);
        const double d = g[col][col];
        for (int r = col + 1; r < 6; ++r) {
            const double f = g[r][col] / d;
            for (int c = col; c < 6; ++c) g[r][c] -= f * g[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    for (int r = 5; r >= 0; --r) {
        double s = rhs[r];
        for (int c = r + 1; c < 6; ++c) s -= g[r][c] * rhs[c];
        rhs[r] = s / g[r][r];
    }
}

PolyExpansion poly_expand(const Matrix& img, int poly_n, double sigma) {
    const int hw = poly_n / 2;
    const int64_t h = img.rows, w = img.cols;

    // window offsets, weights and basis [1, x, y, x^2, y^2, xy]
    std::vector<double> wgt;
    std::vector<std::array<double, 6>> basis;
    for (int i = -hw; i <= hw; ++i)
        for (int j = -hw; j <= hw; ++j) {
            wgt.push_back(std::exp(-(i * i + j * j) / (2.0 * sigma * sigma)));
            basis.push_back({1.0, static_cast<double>(j), static_cast<double>(i),
                             static_cast<double>(j * j), static_cast<double>(i * i),
                             static_cast<double>(i * j)});
        }

    // Gram matrix and its factorization via explicit inverse columns
    std::array<std::array<double, 6>, 6> gram{};
    for (size_t t = 0; t < wgt.size(); ++t)
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c) gram[r][c] += wgt[t] * basis[t][r] * basis[t][c];
    std::array<std::array<double, 6>, 6> ginv{};
    for (int col = 0; col < 6; ++col) {
        std::array<double, 6> e{};
        e[col] = 1.0;
        solve6(gram, e);
        for (int r = 0; r < 6; ++r) ginv[r][col] = e[r];
    }

    PolyExpansion pe{Matrix(h, w), Matrix(h, w), Matrix(h, w), Matrix(h, w), Matrix(h, w)};
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            std::array<double, 6> rhs{};
            size_t t = 0;
            for (int i = -hw; i <= hw; ++i)
                for (int j = -hw; j <= hw; ++j, ++t) {
                    const double f = wgt[t] * sample_mirror(img, y + i, x + j);
                    for (int r = 0; r < 6; ++r) rhs[r] += f * basis[t][r];
                }
            std::array<double, 6> coef{};
            for (int r = 0; r < 6; ++r) {
                double s = 0.0;
                for (int c = 0; c < 6; ++c) s += ginv[r][c] * rhs[c];
                coef[r] = s;
            }
            pe.bx(y, x) = coef[1];
            pe.by(y, x) = coef[2];
            pe.axx(y, x) = coef[3];
            pe.ayy(y, x) = coef[4];
            pe.axy(y, x) = coef[5] * 0.5;
        }
    }
    return pe;
}

// normalized box mean of width `win`, truncated at the borders; separable
Matrix box_mean(const Matrix& src, int win) {
    const int hw = win / 2;
    const int64_t h = src.rows, w = src.cols;
    Matrix tmp(h, w), out(h, w);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t y = 0; y < h; ++y) {
        std::vector<double> pref(static_cast<size_t>(w) + 1, 0.0);
        for (int64_t x = 0; x < w; ++x) pref[static_cast<size_t>(x) + 1] = pref[static_cast<size_t>(x)] + src(y, x);
        for (int64_t x = 0; x < w; ++x) {
            const int64_t lo = clampi(x - hw, 0, w);
            const int64_t hi = clampi(x + hw + 1, 0, w);
            tmp(y, x) = (pref[static_cast<size_t>(hi)] - pref[static_cast<size_t>(lo)]) / (hi - lo);
        }
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t x = 0; x < w; ++x) {
        std::vector<double> pref(static_cast<size_t>(h) + 1, 0.0);
        for (int64_t y = 0; y < h; ++y) pref[static_cast<size_t>(y) + 1] = pref[static_cast<size_t>(y)] + tmp(y, x);
        for (int64_t y = 0; y < h; ++y) {
            const int64_t lo = clampi(y - hw, 0, h);
            const int64_t hi = clampi(y + hw + 1, 0, h);
            out(y, x) = (pref[static_cast<size_t>(hi)] - pref[static_cast<size_t>(lo)]) / (hi - lo);
        }
    }
    return out;
}

Matrix gaussian_blur(const Matrix& src, double sigma) {
    const int rad = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<size_t>(2 * rad + 1));
    double ksum = 0.0;
    for (int i = -rad; i <= rad; ++i) {
        k[static_cast<size_t>(i + rad)] = std::exp(-i * i / (2.0 * sigma * sigma));
        ksum += k[static_cast<size_t>(i + rad)];
    }
    for (double& v : k) v /= ksum;
    const int64_t h = src.rows, w = src.cols;
    Matrix tmp(h, w), out(h, w);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -rad; i <= rad; ++i) s += k[static_cast<size_t>(i + rad)] * sample_mirror(src, y, x + i);
            tmp(y, x) = s;
        }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -rad; i <= rad; ++i) s += k[static_cast<size_t>(i + rad)] * sample_mirror(tmp, y + i, x);
            out(y, x) = s;
        }
    return out;
}

Matrix resize_bilinear(const Matrix& src, int64_t nh, int64_t nw) {
    Matrix out(nh, nw);
    const double sy = static_cast<double>(src.rows) / nh;
    const double sx = static_cast<double>(src.cols) / nw;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t y = 0; y < nh; ++y)
        for (int64_t x = 0; x < nw; ++x)
            out(y, x) = sample_bilinear(src, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5);
    return out;
}

// One refinement pass at a fixed pyramid level: accumulate the local linear
// systems, average them over the window, solve 2x2 per pixel.
void refine_level(const PolyExpansion& p1, const PolyExpansion& p2, Matrix& dx, Matrix& dy,
                  int winsize, int iterations) {
    const int64_t h = dx.rows, w = dx.cols;
    for (int it = 0; it < iterations; ++it) {
        Matrix m11(h, w), m12(h, w), m22(h, w), h1(h, w), h2(h, w);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x) {
                const double dx0 = dx(y, x), dy0 = dy(y, x);
                const double px = x + dx0, py = y + dy0;
                const double a11 = 0.5 * (p1.axx(y, x) + sample_bilinear(p2.axx, py, px));
                const double a12 = 0.5 * (p1.axy(y, x) + sample_bilinear(p2.axy, py, px));
                const double a22 = 0.5 * (p1.ayy(y, x) + sample_bilinear(p2.ayy, py, px));
                const double gx = -0.5 * (sample_bilinear(p2.bx, py, px) - p1.bx(y, x)) +
                                  (a11 * dx0 + a12 * dy0);
                const double gy = -0.5 * (sample_bilinear(p2.by, py, px) - p1.by(y, x)) +
                                  (a12 * dx0 + a22 * dy0);
                // A is symmetric; accumulate A'A and A'g
                m11(y, x) = a11 * a11 + a12 * a12;
                m12(y, x) = a12 * (a11 + a22);
                m22(y, x) = a12 * a12 + a22 * a22;
                h1(y, x) = a11 * gx + a12 * gy;
                h2(y, x) = a12 * gx + a22 * gy;
            }
        m11 = box_mean(m11, winsize);
        m12 = box_mean(m12, winsize);
        m22 = box_mean(m22, winsize);
        h1 = box_mean(h1, winsize);
        h2 = box_mean(h2, winsize);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x) {
                const double eps = 1e-9;
                const double a = m11(y, x) + eps, b = m12(y, x), c = m22(y, x) + eps;
                const double det = a * c - b * b;
                if (std::fabs(det) < 1e-30) {
                    dx(y, x) = 0.0;
                    dy(y, x) = 0.0;
                } else {
                    dx(y, x) = (c * h1(y, x) - b * h2(y, x)) / det;
                    dy(y, x) = (a * h2(y, x) - b * h1(y, x)) / det;
                }
            }
    }
}

}  // namespace

void FlowConfig::validate() const {
    if (!(pyr_scale > 0.0 && pyr_scale < 1.0))
        throw std::invalid_argument("flow: pyr_scale must be in (0,1)");
    if (levels < 1) throw std::invalid_argument("flow: levels must be >= 1");
    if (winsize < 1 || winsize % 2 == 0) throw std::invalid_argument("flow: winsize must be odd >= 1");
    if (iterations < 1) throw std::invalid_argument("flow: iterations must be >= 1");
    if (poly_n < 3 || poly_n % 2 == 0) throw std::invalid_argument("flow: poly_n must be odd >= 3");
    if (poly_sigma <= 0.0) throw std::invalid_argument("flow: poly_sigma must be > 0");
}

FlowField farneback(const Matrix& prev, const Matrix& next, const FlowConfig& cfg) {
    cfg.validate();
    if (prev.rows != next.rows || prev.cols != next.cols)
        throw std::invalid_argument("farneback: frames differ in shape");
    if (std::min(prev.rows, prev.cols) < cfg.poly_n)
        throw std::invalid_argument("farneback: frame smaller than the polynomial window");

    // pyramid sizes, skipping levels that get smaller than the window
    std::vector<std::pair<int64_t, int64_t>> sizes{{prev.rows, prev.cols}};
    for (int l = 1; l < cfg.levels; ++l) {
        const int64_t nh = static_cast<int64_t>(std::lround(sizes.back().first * cfg.pyr_scale));
        const int64_t nw = static_cast<int64_t>(std::lround(sizes.back().second * cfg.pyr_scale));
        if (std::min(nh, nw) < cfg.poly_n) break;
        sizes.emplace_back(nh, nw);
    }

    const double blur_sigma = std::sqrt(std::max(0.01, 0.25 / (cfg.pyr_scale * cfg.pyr_scale) - 0.25));
    std::vector<Matrix> pyr1{prev}, pyr2{next};
    for (size_t l = 1; l < sizes.size(); ++l) {
        pyr1.push_back(resize_bilinear(gaussian_blur(pyr1[l - 1], blur_sigma), sizes[l].first, sizes[l].second));
        pyr2.push_back(resize_bilinear(gaussian_blur(pyr2[l - 1], blur_sigma), sizes[l].first, sizes[l].second));
    }

    Matrix dx, dy;
    for (int l = static_cast<int>(sizes.size()) - 1; l >= 0; --l) {
        const int64_t h = sizes[static_cast<size_t>(l)].first;
        const int64_t w = sizes[static_cast<size_t>(l)].second;
        if (l == static_cast<int>(sizes.size()) - 1) {
            dx = Matrix(h, w, 0.0);
            dy = Matrix(h, w, 0.0);
        } else {
            const double r = static_cast<double>(w) / dx.cols;
            Matrix ndx = resize_bilinear(dx, h, w);
            Matrix ndy = resize_bilinear(dy, h, w);
            for (int64_t i = 0; i < ndx.size(); ++i) {
                ndx.a[static_cast<size_t>(i)] *= r;
                ndy.a[static_cast<size_t>(i)] *= r;
            }
            dx = std::move(ndx);
            dy = std::move(ndy);
        }
        const PolyExpansion p1 = poly_expand(pyr1[static_cast<size_t>(l)], cfg.poly_n, cfg.poly_sigma);
        const PolyExpansion p2 = poly_expand(pyr2[static_cast<size_t>(l)], cfg.poly_n, cfg.poly_sigma);
        refine_level(p1, p2, dx, dy, cfg.winsize, cfg.iterations);
    }
    return FlowField{std::move(dx), std::move(dy)};
}

Matrix flow_magnitude(const FlowField& f) {
    Matrix m(f.dx.rows, f.dx.cols);
    for (int64_t i = 0; i < m.size(); ++i)
        m.a[static_cast<size_t>(i)] = std::hypot(f.dx.a[static_cast<size_t>(i)], f.dy.a[static_cast<size_t>(i)]);
    return m;
}

Matrix frame_of(const DenseTensor& stack, int64_t f) {
    if (stack.ndim() != 3) throw std::invalid_argument("frame_of: need a 3-way stack");
    const int64_t n1 = stack.dims[0], n2 = stack.dims[1], n3 = stack.dims[2];
    if (f < 0 || f >= n3) throw std::invalid_argument("frame_of: frame out of range");
    Matrix img(n1, n2);
    for (int64_t i = 0; i < n1; ++i)
        for (int64_t j = 0; j < n2; ++j) img(i, j) = stack.data[static_cast<size_t>((i * n2 + j) * n3 + f)];
    return img;
}

void set_frame(DenseTensor& stack, int64_t f, const Matrix& img) {
    const int64_t n1 = stack.dims[0], n2 = stack.dims[1], n3 = stack.dims[2];
    if (img.rows != n1 || img.cols != n2) throw std::invalid_argument("set_frame: shape mismatch");
    for (int64_t i = 0; i < n1; ++i)
        for (int64_t j = 0; j < n2; ++j) stack.data[static_cast<size_t>((i * n2 + j) * n3 + f)] = img(i, j);
}

DenseTensor magnitude_stack(const DenseTensor& frames, const FlowConfig& cfg) {
    if (frames.ndim() != 3) throw std::invalid_argument("magnitude_stack: need a 3-way stack");
    const int64_t n3 = frames.dims[2];
    DenseTensor mags(frames.dims, 0.0);
    for (int64_t f = 1; f < n3; ++f) {
        const FlowField fl = farneback(frame_of(frames, f - 1), frame_of(frames, f), cfg);
        set_frame(mags, f, flow_magnitude(fl));
    }
    return mags;
}

void normalize_by_global_max(DenseTensor& mags) {
    double mx = 0.0;
    for (double v : mags.data) mx = std::max(mx, v);
    if (mx > 0.0)
        for (double& v : mags.data) v /= mx;
}

DenseTensor dynamic_fuse(const DenseTensor& mags, int k, double beta) {
    if (mags.ndim() != 3) throw std::invalid_argument("dynamic_fuse: need a 3-way stack");
    if (mags.dims[2] < 1) throw std::invalid_argument("dynamic_fuse: empty stack");
    if (k < 0) throw std::invalid_argument("dynamic_fuse: k must be >= 0");
    if (!(beta > 0.0)) throw std::invalid_argument("dynamic_fuse: beta must be > 0");
    const int64_t n1 = mags.dims[0], n2 = mags.dims[1], n3 = mags.dims[2];
    const int64_t plane = n1 * n2;
    DenseTensor fused(mags.dims);

    // frame-major views make the per-frame reductions contiguous
    std::vector<double> cur(static_cast<size_t>(plane));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t f = 0; f < n3; ++f) {
        if (f == 0) {
            for (int64_t q = 0; q < plane; ++q)
                fused.data[static_cast<size_t>(q * n3)] = mags.data[static_cast<size_t>(q * n3)];
            continue;
        }
        double m = 0.0;
        for (int64_t q = 0; q < plane; ++q) m = std::max(m, mags.data[static_cast<size_t>(q * n3 + f)]);
        const double alpha = m / (m + beta);
        const int64_t avail = std::min<int64_t>(k, f);
        for (int64_t q = 0; q < plane; ++q) {
            const double mf = mags.data[static_cast<size_t>(q * n3 + f)];
            if (avail == 0) {
                fused.data[static_cast<size_t>(q * n3 + f)] = mf;
                continue;
            }
            double hist = 0.0;
            for (int64_t i = 1; i <= avail; ++i) hist += mags.data[static_cast<size_t>(q * n3 + f - i)];
            hist /= static_cast<double>(avail);
            fused.data[static_cast<size_t>(q * n3 + f)] = alpha * mf + (1.0 - alpha) * hist;
        }
    }
    (void)cur;
    return fused;
}

DenseTensor motion_enhance(const DenseTensor& d, const DenseTensor& fused, double gamma) {
    if (!d.same_shape(fused)) throw std::invalid_argument("motion_enhance: shape mismatch");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("motion_enhance: gamma must be in [0,1]");
    DenseTensor x(d.dims);
    const int64_t n = d.size();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t i = 0; i < n; ++i)
        x.data[static_cast<size_t>(i)] = (1.0 - gamma) * d[i] + gamma * fused[i];
    return x;
}

FlowStack compute_flow_stack(const DenseTensor& frames, const FlowConfig& cfg, int k,
                             double beta, bool normalize) {
    FlowStack fs;
    fs.mags = magnitude_stack(frames, cfg);
    if (normalize) normalize_by_global_max(fs.mags);
    fs.fused = dynamic_fuse(fs.mags, k, beta);
    return fs;
}

}  // namespace nlinr::flow
