#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "nlinr/nlt1.hpp"
#include "nlinr/rng.hpp"
#include "nlinr/tensor.hpp"

using namespace nlinr;

namespace {

DenseTensor random_tensor(const std::vector<int64_t>& dims, Rng& rng) {
    DenseTensor t(dims);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

double rel_err(double a, double b) {
    const double denom = std::max({std::fabs(a), std::fabs(b), 1e-300});
    return std::fabs(a - b) / denom;
}

}  // namespace

TEST_CASE("unfold of a matrix along mode 0 is the matrix itself") {
    DenseTensor t({2, 2});
    t.data = {1, 2, 3, 4};
    const Matrix m = unfold(t, 0);
    CHECK(m.rows == 2);
    CHECK(m.cols == 2);
    CHECK(m(0, 0) == 1);
    CHECK(m(0, 1) == 2);
    CHECK(m(1, 0) == 3);
    CHECK(m(1, 1) == 4);
}

TEST_CASE("unfold matches an index-enumeration oracle on a 2x2x2 tensor") {
    DenseTensor t({2, 2, 2});
    for (int64_t i = 0; i < 8; ++i) t[i] = static_cast<double>(i);
    const Matrix m = unfold(t, 2);
    REQUIRE(m.rows == 2);
    REQUIRE(m.cols == 4);
    // oracle: row r collects all entries with third index r; the remaining
    // modes (0,1) enumerate columns in ascending order, last varying fastest
    for (int64_t i0 = 0; i0 < 2; ++i0)
        for (int64_t i1 = 0; i1 < 2; ++i1)
            for (int64_t i2 = 0; i2 < 2; ++i2)
                CHECK(m(i2, i0 * 2 + i1) == t.at({i0, i1, i2}));
    // frozen expected rows from that oracle
    CHECK(m(0, 0) == 0);
    CHECK(m(0, 1) == 2);
    CHECK(m(0, 2) == 4);
    CHECK(m(0, 3) == 6);
    CHECK(m(1, 0) == 1);
    CHECK(m(1, 1) == 3);
    CHECK(m(1, 2) == 5);
    CHECK(m(1, 3) == 7);
}

TEST_CASE("fold inverts unfold for every mode on randomized shapes") {
    Rng rng(42);
    const std::vector<std::vector<int64_t>> shapes = {
        {5}, {3, 4}, {2, 3, 4}, {3, 2, 4, 2}, {1, 5, 1, 3}};
    for (const auto& dims : shapes) {
        const DenseTensor t = random_tensor(dims, rng);
        for (int mode = 0; mode < t.ndim(); ++mode) {
            const DenseTensor back = fold(unfold(t, mode), mode, t.dims);
            REQUIRE(back.dims == t.dims);
            for (int64_t i = 0; i < t.size(); ++i) CHECK(back[i] == t[i]);
        }
    }
}

TEST_CASE("unfold inverts fold") {
    Rng rng(43);
    Matrix m(3, 8);
    for (double& v : m.a) v = rng.uniform(-1.0, 1.0);
    const DenseTensor t = fold(m, 0, {3, 2, 4});
    const Matrix back = unfold(t, 0);
    for (size_t i = 0; i < m.a.size(); ++i) CHECK(back.a[i] == m.a[i]);
}

TEST_CASE("fold of a 1x1 matrix gives the scalar tensor") {
    Matrix m(1, 1);
    m(0, 0) = 7.5;
    const DenseTensor t = fold(m, 1, {1, 1, 1});
    CHECK(t.size() == 1);
    CHECK(t[0] == 7.5);
}

TEST_CASE("unfold and fold reject out-of-range modes") {
    DenseTensor t({2, 2});
    CHECK_THROWS_AS((void)unfold(t, 2), std::invalid_argument);
    CHECK_THROWS_AS((void)unfold(t, -1), std::invalid_argument);
    Matrix m(2, 2);
    CHECK_THROWS_AS((void)fold(m, 3, {2, 2}), std::invalid_argument);
    CHECK_THROWS_AS((void)fold(Matrix(3, 2), 0, {2, 2}), std::invalid_argument);
}

TEST_CASE("mode product with the identity leaves the tensor unchanged") {
    Rng rng(44);
    const DenseTensor t = random_tensor({3, 4, 2}, rng);
    Matrix eye(4, 4);
    for (int64_t i = 0; i < 4; ++i) eye(i, i) = 1.0;
    const DenseTensor r = mode_product(t, eye, 1);
    for (int64_t i = 0; i < t.size(); ++i) CHECK(r[i] == doctest::Approx(t[i]).epsilon(1e-14));
}

TEST_CASE("mode product with a ones row sums along the mode") {
    DenseTensor t({2, 2});
    t.data = {1, 2, 3, 4};
    Matrix ones(1, 2);
    ones(0, 0) = ones(0, 1) = 1.0;
    const DenseTensor r = mode_product(t, ones, 0);
    REQUIRE(r.dims == std::vector<int64_t>{1, 2});
    CHECK(r[0] == 4);  // column sums: 1+3, 2+4
    CHECK(r[1] == 6);
}

TEST_CASE("mode product matches the triple-loop oracle") {
    Rng rng(45);
    const DenseTensor t = random_tensor({3, 4, 5}, rng);
    Matrix a(2, 4);
    for (double& v : a.a) v = rng.uniform(-1.0, 1.0);
    const DenseTensor r = mode_product(t, a, 1);
    REQUIRE(r.dims == std::vector<int64_t>{3, 2, 5});
    for (int64_t i = 0; i < 3; ++i)
        for (int64_t q = 0; q < 2; ++q)
            for (int64_t k = 0; k < 5; ++k) {
                double expect = 0.0;
                for (int64_t j = 0; j < 4; ++j) expect += a(q, j) * t.at({i, j, k});
                CHECK(rel_err(r.at({i, q, k}), expect) < 1e-12);
            }
}

TEST_CASE("mode products on distinct modes commute") {
    Rng rng(46);
    const DenseTensor t = random_tensor({3, 4, 5}, rng);
    Matrix a(2, 3), b(6, 4);
    for (double& v : a.a) v = rng.uniform(-1.0, 1.0);
    for (double& v : b.a) v = rng.uniform(-1.0, 1.0);
    const DenseTensor ab = mode_product(mode_product(t, a, 0), b, 1);
    const DenseTensor ba = mode_product(mode_product(t, b, 1), a, 0);
    REQUIRE(ab.dims == ba.dims);
    for (int64_t i = 0; i < ab.size(); ++i) CHECK(rel_err(ab[i], ba[i]) < 1e-12);
}

TEST_CASE("mode product rejects mismatched shapes") {
    DenseTensor t({3, 4});
    Matrix a(2, 3);
    CHECK_THROWS_AS((void)mode_product(t, a, 1), std::invalid_argument);
}

TEST_CASE("fro_norm basics") {
    DenseTensor z({4, 3});
    CHECK(fro_norm(z) == 0.0);
    DenseTensor one({1});
    one[0] = 3.0;
    CHECK(fro_norm(one) == 3.0);
    DenseTensor pyth({2});
    pyth.data = {3.0, 4.0};
    CHECK(fro_norm(pyth) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("fro_norm^2 equals the sum of squared row norms of the unfolding") {
    Rng rng(47);
    const DenseTensor t = random_tensor({4, 3, 5}, rng);
    const Matrix m = unfold(t, 0);
    double rows = 0.0;
    for (int64_t i = 0; i < m.rows; ++i) {
        double r = 0.0;
        for (int64_t j = 0; j < m.cols; ++j) r += m(i, j) * m(i, j);
        rows += r;
    }
    const double f2 = fro_norm(t) * fro_norm(t);
    CHECK(rel_err(f2, rows) < 1e-12);
}

TEST_CASE("l1_norm basics") {
    DenseTensor z({3});
    CHECK(l1_norm(z) == 0.0);
    DenseTensor t({2});
    t.data = {-1.0, 2.0};
    CHECK(l1_norm(t) == 3.0);
    DenseTensor hot({3, 3});
    hot.at({1, 2}) = -0.7;
    CHECK(l1_norm(hot) == doctest::Approx(fro_norm(hot)).epsilon(1e-15));
}

TEST_CASE("forward_diff of a constant tensor is exactly zero") {
    DenseTensor t({3, 4, 2}, 2.5);
    for (int axis = 0; axis < 3; ++axis) {
        const DenseTensor d = forward_diff(t, axis);
        for (int64_t i = 0; i < d.size(); ++i) CHECK(d[i] == 0.0);
    }
}

TEST_CASE("forward_diff on a 1-D sequence, zero-padded at the end") {
    DenseTensor t({3});
    t.data = {1.0, 3.0, 6.0};
    const DenseTensor d = forward_diff(t, 0);
    CHECK(d[0] == 2.0);
    CHECK(d[1] == 3.0);
    CHECK(d[2] == 0.0);
}

TEST_CASE("forward_diff of a linear ramp telescopes to slope*(n-1)") {
    const int64_t n = 17;
    const double slope = 0.35;
    DenseTensor t({n});
    for (int64_t i = 0; i < n; ++i) t[i] = 1.2 + slope * static_cast<double>(i);
    const DenseTensor d = forward_diff(t, 0);
    double sum = 0.0;
    for (int64_t i = 0; i < n; ++i) sum += d[i];
    CHECK(sum == doctest::Approx(slope * static_cast<double>(n - 1)).epsilon(1e-12));
}

TEST_CASE("forward_diff rejects a bad axis") {
    DenseTensor t({2, 2});
    CHECK_THROWS_AS((void)forward_diff(t, 2), std::invalid_argument);
}

TEST_CASE("NLT1 round trip is exact and the header is bit-exact") {
    DenseTensor t({2, 3});
    t.data = {0.0, 0.5, 1.0, -0.25, 42.0, 255.0 / 255.0};  // float32-representable
    std::stringstream ss;
    write_nlt1(ss, t);
    const std::string bytes = ss.str();
    REQUIRE(bytes.size() == 4 + 4 + 2 * 4 + 6 * 4);
    CHECK(bytes.substr(0, 4) == "NLT1");
    CHECK(static_cast<unsigned char>(bytes[4]) == 2);  // rank, little-endian
    CHECK(static_cast<unsigned char>(bytes[8]) == 2);  // extent 0
    CHECK(static_cast<unsigned char>(bytes[12]) == 3); // extent 1

    std::stringstream back(bytes);
    const DenseTensor r = read_nlt1(back);
    REQUIRE(r.dims == t.dims);
    for (int64_t i = 0; i < t.size(); ++i) CHECK(r[i] == t[i]);
}

TEST_CASE("NLT1 rejects corrupt input") {
    std::stringstream ss("XXXX");
    CHECK_THROWS_AS((void)read_nlt1(ss), io_error);
}
