#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlinr {

/// Thrown when a computation produces non-finite values.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown on file/format problems.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense N-way tensor, row-major with the last index varying fastest.
struct DenseTensor {
    std::vector<int64_t> dims;
    std::vector<double> data;

    DenseTensor() = default;
    explicit DenseTensor(std::vector<int64_t> d, double fill = 0.0)
        : dims(std::move(d)) {
        for (int64_t e : dims)
            if (e <= 0) throw std::invalid_argument("DenseTensor: non-positive extent");
        data.assign(static_cast<size_t>(count(dims)), fill);
    }

    static int64_t count(const std::vector<int64_t>& d) {
        int64_t n = 1;
        for (int64_t e : d) n *= e;
        return n;
    }

    int ndim() const { return static_cast<int>(dims.size()); }
    int64_t size() const { return static_cast<int64_t>(data.size()); }

    double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    /// Multi-index access (slow path, for tests and small tensors).
    double& at(std::initializer_list<int64_t> idx) { return data[static_cast<size_t>(flat(idx))]; }
    double at(std::initializer_list<int64_t> idx) const { return data[static_cast<size_t>(flat(idx))]; }

    int64_t flat(std::initializer_list<int64_t> idx) const {
        if (static_cast<int>(idx.size()) != ndim())
            throw std::invalid_argument("DenseTensor::at: rank mismatch");
        int64_t f = 0;
        int k = 0;
        for (int64_t i : idx) {
            if (i < 0 || i >= dims[k]) throw std::invalid_argument("DenseTensor::at: index out of range");
            f = f * dims[k] + i;
            ++k;
        }
        return f;
    }

    bool same_shape(const DenseTensor& o) const { return dims == o.dims; }
};

/// Row-major dense matrix.
struct Matrix {
    int64_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int64_t r, int64_t c, double fill = 0.0)
        : rows(r), cols(c), a(static_cast<size_t>(r * c), fill) {
        if (r <= 0 || c <= 0) throw std::invalid_argument("Matrix: non-positive extent");
    }

    double& operator()(int64_t r, int64_t c) { return a[static_cast<size_t>(r * cols + c)]; }
    double operator()(int64_t r, int64_t c) const { return a[static_cast<size_t>(r * cols + c)]; }
    int64_t size() const { return rows * cols; }
};

// ---- algebra -------------------------------------------------------------

/// Mode-`mode` unfolding (0-based mode). Result has shape
/// (dims[mode], prod of remaining dims); columns enumerate the remaining
/// modes in ascending order with the last one varying fastest.
Matrix unfold(const DenseTensor& t, int mode);

/// Exact inverse of unfold under the same ordering convention.
DenseTensor fold(const Matrix& m, int mode, const std::vector<int64_t>& dims);

/// Mode-`mode` product with a matrix: fold(a * unfold(t, mode)).
/// Requires a.cols == t.dims[mode]; the result replaces that extent by a.rows.
DenseTensor mode_product(const DenseTensor& t, const Matrix& a, int mode);

double fro_norm(const DenseTensor& t);
double l1_norm(const DenseTensor& t);

/// Forward first-order difference along `axis`: out[..i..] = t[..i+1..] - t[..i..],
/// with the last slice along the axis set to zero (output keeps the input shape).
DenseTensor forward_diff(const DenseTensor& t, int axis);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

bool all_finite(const DenseTensor& t);
bool all_finite(const Matrix& m);

// elementwise helpers used across the solver
DenseTensor operator+(const DenseTensor& a, const DenseTensor& b);
DenseTensor operator-(const DenseTensor& a, const DenseTensor& b);
DenseTensor scaled(const DenseTensor& a, double s);

/// Blocked sum with a fixed block size so the result is bit-identical no
/// matter how many threads execute the blocks.
double deterministic_sum(const double* x, int64_t n);

}  // namespace nlinr
