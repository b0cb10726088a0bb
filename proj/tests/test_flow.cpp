#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nlinr/flow.hpp"
#include "nlinr/rng.hpp"

using namespace nlinr;
using namespace nlinr::flow;

namespace {

// smooth analytic texture; translation tests sample it at shifted coordinates
double texture(double i, double j) {
    return 0.5 + 0.16 * std::sin(0.35 * i + 1.1) * std::sin(0.28 * j + 0.3) +
           0.12 * std::sin(0.11 * i + 0.19 * j + 0.7) + 0.10 * std::cos(0.23 * i - 0.31 * j);
}

Matrix textured_frame(int64_t n, double di, double dj) {
    Matrix img(n, n);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) img(i, j) = texture(static_cast<double>(i) - di, static_cast<double>(j) - dj);
    return img;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace

TEST_CASE("flow magnitude is the elementwise Euclidean norm") {
    FlowField f{Matrix(2, 2), Matrix(2, 2)};
    f.dx(0, 0) = 3.0;
    f.dy(0, 0) = 4.0;
    const Matrix m = flow_magnitude(f);
    CHECK(m(0, 0) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(m(1, 1) == 0.0);

    // sign flips do not change the magnitude
    FlowField g{f.dx, f.dy};
    for (double& v : g.dx.a) v = -v;
    for (double& v : g.dy.a) v = -v;
    const Matrix m2 = flow_magnitude(g);
    for (size_t i = 0; i < m.a.size(); ++i) CHECK(m2.a[i] == m.a[i]);
}

TEST_CASE("identical frames give zero flow") {
    const Matrix img = textured_frame(64, 0, 0);
    const FlowField f = farneback(img, img);
    double mx = 0.0;
    for (double v : f.dx.a) mx = std::max(mx, std::fabs(v));
    for (double v : f.dy.a) mx = std::max(mx, std::fabs(v));
    CHECK(mx <= 1e-6);
}

TEST_CASE("integer translation is recovered within 0.3 px in the median") {
    const int64_t n = 96;
    const Matrix prev = textured_frame(n, 0, 0);
    const Matrix next = textured_frame(n, 0, 1.0);  // content moves +1 column
    const FlowField f = farneback(prev, next);
    std::vector<double> dxs, dys;
    const int64_t margin = 12;
    for (int64_t i = margin; i < n - margin; ++i)
        for (int64_t j = margin; j < n - margin; ++j) {
            dxs.push_back(f.dx(i, j));
            dys.push_back(f.dy(i, j));
        }
    CHECK(std::fabs(median(dxs) - 1.0) <= 0.3);
    CHECK(std::fabs(median(dys)) <= 0.3);
}

TEST_CASE("vertical translation moves dy") {
    const int64_t n = 96;
    const Matrix prev = textured_frame(n, 0, 0);
    const Matrix next = textured_frame(n, 1.0, 0);
    const FlowField f = farneback(prev, next);
    std::vector<double> dys;
    for (int64_t i = 12; i < n - 12; ++i)
        for (int64_t j = 12; j < n - 12; ++j) dys.push_back(f.dy(i, j));
    CHECK(std::fabs(median(dys) - 1.0) <= 0.3);
}

TEST_CASE("pure noise frames produce finite flow") {
    Rng rng(7);
    Matrix a(48, 48), b(48, 48);
    for (double& v : a.a) v = rng.uniform01();
    for (double& v : b.a) v = rng.uniform01();
    const FlowField f = farneback(a, b);
    for (double v : f.dx.a) CHECK(std::isfinite(v));
    for (double v : f.dy.a) CHECK(std::isfinite(v));
}

TEST_CASE("frames smaller than the polynomial window are rejected") {
    Matrix tiny(3, 3);
    CHECK_THROWS_AS((void)farneback(tiny, tiny), std::invalid_argument);
    Matrix a(10, 10), b(12, 12);
    CHECK_THROWS_AS((void)farneback(a, b), std::invalid_argument);  // shape mismatch
}

TEST_CASE("dynamic fusion: peak equal to beta gives alpha exactly one half") {
    // frame 1 peaks at m = beta = 0.1 -> alpha = 0.5
    DenseTensor mags({2, 2, 2});
    mags.at({0, 0, 0}) = 0.04;
    mags.at({1, 1, 0}) = 0.02;
    mags.at({0, 0, 1}) = 0.1;  // the per-frame max
    mags.at({1, 0, 1}) = 0.06;
    const DenseTensor fused = dynamic_fuse(mags, 4, 0.1);
    // frame 0 passes through
    CHECK(fused.at({0, 0, 0}) == 0.04);
    CHECK(fused.at({1, 1, 0}) == 0.02);
    // frame 1: 0.5*M_1 + 0.5*M_0
    CHECK(fused.at({0, 0, 1}) == doctest::Approx(0.5 * 0.1 + 0.5 * 0.04).epsilon(1e-15));
    CHECK(fused.at({1, 0, 1}) == doctest::Approx(0.5 * 0.06).epsilon(1e-15));
    CHECK(fused.at({1, 1, 1}) == doctest::Approx(0.5 * 0.02).epsilon(1e-15));
}

TEST_CASE("dynamic fusion: an all-zero frame relies fully on history") {
    DenseTensor mags({1, 1, 4});
    mags.at({0, 0, 0}) = 0.2;
    mags.at({0, 0, 1}) = 0.4;
    mags.at({0, 0, 2}) = 0.6;
    // frame 3 all zero -> alpha = 0 -> mean of the previous k=3 frames
    const DenseTensor fused = dynamic_fuse(mags, 3, 0.1);
    CHECK(fused.at({0, 0, 3}) == doctest::Approx((0.2 + 0.4 + 0.6) / 3.0).epsilon(1e-15));
}

TEST_CASE("dynamic fusion: short history averages what exists; k = 0 passes through") {
    DenseTensor mags({1, 1, 3});
    mags.at({0, 0, 0}) = 0.3;
    mags.at({0, 0, 1}) = 0.5;
    mags.at({0, 0, 2}) = 0.1;
    const DenseTensor fused = dynamic_fuse(mags, 5, 0.1);  // k exceeds history
    const double a1 = 0.5 / (0.5 + 0.1);
    CHECK(fused.at({0, 0, 1}) == doctest::Approx(a1 * 0.5 + (1 - a1) * 0.3).epsilon(1e-14));
    const double a2 = 0.1 / (0.1 + 0.1);
    CHECK(fused.at({0, 0, 2}) ==
          doctest::Approx(a2 * 0.1 + (1 - a2) * 0.5 * (0.3 + 0.5)).epsilon(1e-14));

    const DenseTensor same = dynamic_fuse(mags, 0, 0.1);
    for (int64_t i = 0; i < mags.size(); ++i) CHECK(same[i] == mags[i]);
}

TEST_CASE("dynamic fusion validates its arguments") {
    DenseTensor mags({2, 2, 2});
    CHECK_THROWS_AS((void)dynamic_fuse(mags, -1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS((void)dynamic_fuse(mags, 2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)dynamic_fuse(DenseTensor({2, 2}), 2, 0.1), std::invalid_argument);
}

TEST_CASE("fusion weights form a convex combination and keep positivity") {
    Rng rng(11);
    DenseTensor mags({6, 5, 8});
    for (double& v : mags.data) v = rng.uniform(0.0, 1.0);
    const int k = 4;
    const double beta = 0.1;
    const DenseTensor fused = dynamic_fuse(mags, k, beta);
    for (double v : fused.data) CHECK(v >= 0.0);
    // recompute one pixel per frame from the stated formula
    const int64_t n3 = mags.dims[2];
    for (int64_t f = 1; f < n3; ++f) {
        double m = 0.0;
        for (int64_t i = 0; i < 6; ++i)
            for (int64_t j = 0; j < 5; ++j) m = std::max(m, mags.at({i, j, f}));
        const double alpha = m / (m + beta);
        CHECK(alpha >= 0.0);
        CHECK(alpha < 1.0);
        const int64_t avail = std::min<int64_t>(k, f);
        double hist = 0.0;
        for (int64_t q = 1; q <= avail; ++q) hist += mags.at({2, 3, f - q});
        hist /= static_cast<double>(avail);
        const double expect = alpha * mags.at({2, 3, f}) + (1.0 - alpha) * hist;
        CHECK(fused.at({2, 3, f}) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("motion enhancement blends exactly and preserves [0,1]") {
    Rng rng(13);
    DenseTensor d({4, 4, 3}), fused({4, 4, 3});
    for (double& v : d.data) v = rng.uniform(0.0, 1.0);
    for (double& v : fused.data) v = rng.uniform(0.0, 1.0);

    const DenseTensor zero = motion_enhance(d, fused, 0.0);
    for (int64_t i = 0; i < d.size(); ++i) CHECK(zero[i] == d[i]);
    const DenseTensor one = motion_enhance(d, fused, 1.0);
    for (int64_t i = 0; i < d.size(); ++i) CHECK(one[i] == fused[i]);

    DenseTensor a({1}), b({1});
    a[0] = 0.5;
    b[0] = 1.0;
    CHECK(motion_enhance(a, b, 0.05)[0] == doctest::Approx(0.525).epsilon(1e-15));

    const DenseTensor mid = motion_enhance(d, fused, 0.3);
    for (int64_t i = 0; i < mid.size(); ++i) {
        CHECK(mid[i] >= 0.0);
        CHECK(mid[i] <= 1.0);
    }

    CHECK_THROWS_AS((void)motion_enhance(d, DenseTensor({2, 2}), 0.5), std::invalid_argument);
    CHECK_THROWS_AS((void)motion_enhance(d, fused, 1.5), std::invalid_argument);
}

TEST_CASE("magnitude stack is zero on the first frame and normalization caps at one") {
    DenseTensor frames({32, 32, 3});
    for (int64_t f = 0; f < 3; ++f) {
        const Matrix img = textured_frame(32, 0, static_cast<double>(f));
        for (int64_t i = 0; i < 32; ++i)
            for (int64_t j = 0; j < 32; ++j) frames.at({i, j, f}) = img(i, j);
    }
    DenseTensor mags = magnitude_stack(frames);
    for (int64_t i = 0; i < 32; ++i)
        for (int64_t j = 0; j < 32; ++j) CHECK(mags.at({i, j, 0}) == 0.0);
    for (double v : mags.data) CHECK(v >= 0.0);
    normalize_by_global_max(mags);
    double mx = 0.0;
    for (double v : mags.data) mx = std::max(mx, v);
    CHECK(mx <= 1.0 + 1e-15);
    CHECK(mx == doctest::Approx(1.0));  // something moved, so the max hits 1
}
