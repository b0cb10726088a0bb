#include "nlinr/tensor.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nlinr {

namespace {

// Decompose the flat layout around `mode`: left block (modes before),
// the mode extent itself, and right block (modes after, fastest).
struct Split {
    int64_t left = 1, mid = 1, right = 1;
};

Split split_around(const std::vector<int64_t>& dims, int mode) {
    Split s;
    for (int k = 0; k < static_cast<int>(dims.size()); ++k) {
        if (k < mode) s.left *= dims[k];
        else if (k == mode) s.mid = dims[k];
        else s.right *= dims[k];
    }
    return s;
}

}  // namespace

Matrix unfold(const DenseTensor& t, int mode) {
    if (mode < 0 || mode >= t.ndim())
        throw std::invalid_argument("unfold: mode out of range");
    const Split s = split_around(t.dims, mode);
    Matrix m(s.mid, s.left * s.right);
    // Remaining modes in ascending order, last fastest: column = l*right + r.
    for (int64_t l = 0; l < s.left; ++l)
        for (int64_t mm = 0; mm < s.mid; ++mm) {
            const double* src = t.data.data() + (l * s.mid + mm) * s.right;
            double* dst = m.a.data() + mm * m.cols + l * s.right;
            for (int64_t r = 0; r < s.right; ++r) dst[r] = src[r];
        }
    return m;
}

DenseTensor fold(const Matrix& m, int mode, const std::vector<int64_t>& dims) {
    if (mode < 0 || mode >= static_cast<int>(dims.size()))
        throw std::invalid_argument("fold: mode out of range");
    const Split s = split_around(dims, mode);
    if (m.rows != s.mid || m.cols != s.left * s.right)
        throw std::invalid_argument("fold: matrix shape inconsistent with dims/mode");
    DenseTensor t(dims);
    for (int64_t l = 0; l < s.left; ++l)
        for (int64_t mm = 0; mm < s.mid; ++mm) {
            const double* src = m.a.data() + mm * m.cols + l * s.right;
            double* dst = t.data.data() + (l * s.mid + mm) * s.right;
            for (int64_t r = 0; r < s.right; ++r) dst[r] = src[r];
        }
    return t;
}

DenseTensor mode_product(const DenseTensor& t, const Matrix& a, int mode) {
    if (mode < 0 || mode >= t.ndim())
        throw std::invalid_argument("mode_product: mode out of range");
    if (a.cols != t.dims[mode])
        throw std::invalid_argument("mode_product: matrix columns must match tensor extent");
    Matrix u = unfold(t, mode);
    Matrix p = matmul(a, u);
    std::vector<int64_t> nd = t.dims;
    nd[mode] = a.rows;
    return fold(p, mode, nd);
}

double deterministic_sum(const double* x, int64_t n) {
    constexpr int64_t kBlock = 8192;
    const int64_t nblocks = (n + kBlock - 1) / kBlock;
    if (nblocks <= 1) {
        double s = 0.0;
        for (int64_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    std::vector<double> partial(static_cast<size_t>(nblocks), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t b = 0; b < nblocks; ++b) {
        const int64_t lo = b * kBlock;
        const int64_t hi = std::min(n, lo + kBlock);
        double s = 0.0;
        for (int64_t i = lo; i < hi; ++i) s += x[i];
        partial[static_cast<size_t>(b)] = s;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

double fro_norm(const DenseTensor& t) {
    constexpr int64_t kBlock = 8192;
    const int64_t n = t.size();
    const int64_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(static_cast<size_t>(nblocks), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t b = 0; b < nblocks; ++b) {
        const int64_t lo = b * kBlock;
        const int64_t hi = std::min(n, lo + kBlock);
        double s = 0.0;
        for (int64_t i = lo; i < hi; ++i) s += t.data[static_cast<size_t>(i)] * t.data[static_cast<size_t>(i)];
        partial[static_cast<size_t>(b)] = s;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return std::sqrt(total);
}

double l1_norm(const DenseTensor& t) {
    constexpr int64_t kBlock = 8192;
    const int64_t n = t.size();
    const int64_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(static_cast<size_t>(nblocks), 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t b = 0; b < nblocks; ++b) {
        const int64_t lo = b * kBlock;
        const int64_t hi = std::min(n, lo + kBlock);
        double s = 0.0;
        for (int64_t i = lo; i < hi; ++i) s += std::fabs(t.data[static_cast<size_t>(i)]);
        partial[static_cast<size_t>(b)] = s;
    }
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

DenseTensor forward_diff(const DenseTensor& t, int axis) {
    if (axis < 0 || axis >= t.ndim())
        throw std::invalid_argument("forward_diff: axis out of range");
    const Split s = split_around(t.dims, axis);
    DenseTensor out(t.dims);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t l = 0; l < s.left; ++l) {
        for (int64_t mm = 0; mm + 1 < s.mid; ++mm) {
            const double* cur = t.data.data() + (l * s.mid + mm) * s.right;
            const double* nxt = cur + s.right;
            double* dst = out.data.data() + (l * s.mid + mm) * s.right;
            for (int64_t r = 0; r < s.right; ++r) dst[r] = nxt[r] - cur[r];
        }
        // last slice along axis stays zero
    }
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix c(a.rows, b.cols, 0.0);
    const bool par = a.rows * a.cols * b.cols > (1 << 15);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (par)
#endif
    for (int64_t i = 0; i < a.rows; ++i) {
        double* ci = c.a.data() + i * c.cols;
        for (int64_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* bk = b.a.data() + k * b.cols;
            for (int64_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    (void)par;
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (int64_t i = 0; i < m.rows; ++i)
        for (int64_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

bool all_finite(const DenseTensor& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

bool all_finite(const Matrix& m) {
    for (double v : m.a)
        if (!std::isfinite(v)) return false;
    return true;
}

DenseTensor operator+(const DenseTensor& a, const DenseTensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("tensor +: shape mismatch");
    DenseTensor c(a.dims);
    const int64_t n = a.size();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t i = 0; i < n; ++i) c.data[static_cast<size_t>(i)] = a[i] + b[i];
    return c;
}

DenseTensor operator-(const DenseTensor& a, const DenseTensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("tensor -: shape mismatch");
    DenseTensor c(a.dims);
    const int64_t n = a.size();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t i = 0; i < n; ++i) c.data[static_cast<size_t>(i)] = a[i] - b[i];
    return c;
}

DenseTensor scaled(const DenseTensor& a, double s) {
    DenseTensor c(a.dims);
    const int64_t n = a.size();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int64_t i = 0; i < n; ++i) c.data[static_cast<size_t>(i)] = a[i] * s;
    return c;
}

}  // namespace nlinr
