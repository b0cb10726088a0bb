#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "nlinr/grouping.hpp"
#include "nlinr/rng.hpp"

using namespace nlinr;
using namespace nlinr::grouping;

namespace {

DenseTensor random_stack(int64_t n1, int64_t n2, int64_t n3, uint64_t seed) {
    Rng rng(seed);
    DenseTensor t({n1, n2, n3});
    for (double& v : t.data) v = rng.uniform(0.0, 1.0);
    return t;
}

// exhaustive-sort oracle for the nonlocal search
std::vector<int64_t> brute_force_top_s(const std::vector<DenseTensor>& patches, int64_t l, int64_t s) {
    std::vector<std::pair<double, int64_t>> d;
    for (int64_t j = 0; j < static_cast<int64_t>(patches.size()); ++j) {
        if (j == l) continue;
        double acc = 0.0;
        for (int64_t q = 0; q < patches[static_cast<size_t>(l)].size(); ++q) {
            const double diff = patches[static_cast<size_t>(l)][q] - patches[static_cast<size_t>(j)][q];
            acc += diff * diff;
        }
        d.emplace_back(std::sqrt(acc), j);
    }
    std::stable_sort(d.begin(), d.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second < b.second;
    });
    std::vector<int64_t> out;
    for (int64_t i = 0; i < s; ++i) out.push_back(d[static_cast<size_t>(i)].second);
    return out;
}

}  // namespace

TEST_CASE("patch grid covers the image and records the padding") {
    const PatchGrid g = PatchGrid::make(4, 4, 2);
    CHECK(g.rows == 2);
    CHECK(g.cols == 2);
    CHECK(g.patches() == 4);
    CHECK(g.pad_rows == 0);
    CHECK(g.pad_cols == 0);

    const PatchGrid h = PatchGrid::make(5, 7, 4);
    CHECK(h.rows == 2);
    CHECK(h.cols == 2);
    CHECK(h.pad_rows == 3);
    CHECK(h.pad_cols == 1);
}

TEST_CASE("a p-sized image is a single patch equal to the input") {
    const DenseTensor x = random_stack(6, 6, 3, 1);
    const PatchGrid g = PatchGrid::make(6, 6, 6);
    const auto patches = split_patches(pad_reflect(x, g), g);
    REQUIRE(patches.size() == 1);
    for (int64_t i = 0; i < x.size(); ++i) CHECK(patches[0][i] == x[i]);
}

TEST_CASE("4x4 image with p=2 splits row-major; patch 0 is the top-left block") {
    DenseTensor x({4, 4, 1});
    for (int64_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i);
    const PatchGrid g = PatchGrid::make(4, 4, 2);
    const auto patches = split_patches(x, g);
    REQUIRE(patches.size() == 4);
    CHECK(patches[0].at({0, 0, 0}) == x.at({0, 0, 0}));
    CHECK(patches[0].at({0, 1, 0}) == x.at({0, 1, 0}));
    CHECK(patches[0].at({1, 0, 0}) == x.at({1, 0, 0}));
    CHECK(patches[0].at({1, 1, 0}) == x.at({1, 1, 0}));
    // patch 1 sits to the right of patch 0
    CHECK(patches[1].at({0, 0, 0}) == x.at({0, 2, 0}));
    // patch 2 starts the second patch row
    CHECK(patches[2].at({0, 0, 0}) == x.at({2, 0, 0}));
}

TEST_CASE("split then stitch reproduces the padded input exactly") {
    const DenseTensor x = random_stack(11, 7, 4, 2);
    const PatchGrid g = PatchGrid::make(11, 7, 4);
    const DenseTensor padded = pad_reflect(x, g);
    const DenseTensor back = stitch_patches(split_patches(padded, g), g);
    REQUIRE(back.dims == padded.dims);
    for (int64_t i = 0; i < padded.size(); ++i) CHECK(back[i] == padded[i]);
    // the padding mirrors interior content, so the original region is intact
    for (int64_t i = 0; i < 11; ++i)
        for (int64_t j = 0; j < 7; ++j)
            for (int64_t f = 0; f < 4; ++f) CHECK(padded.at({i, j, f}) == x.at({i, j, f}));
}

TEST_CASE("top_s_similar hand case and tie-breaking") {
    // three constant patches at controlled distances from patch 0
    std::vector<DenseTensor> patches;
    for (double v : {0.0, 1.0, 2.0}) patches.emplace_back(std::vector<int64_t>{1, 1, 1}, v);
    CHECK(top_s_similar(patches, 0, 1) == std::vector<int64_t>{1});
    CHECK(top_s_similar(patches, 0, 2) == std::vector<int64_t>{1, 2});

    std::vector<DenseTensor> equal(3, DenseTensor({2, 2, 1}, 0.5));
    CHECK(top_s_similar(equal, 0, 2) == std::vector<int64_t>{1, 2});  // ties by index
    CHECK(top_s_similar(equal, 1, 2) == std::vector<int64_t>{0, 2});
}

TEST_CASE("top_s_similar matches the exhaustive oracle on random instances") {
    Rng rng(3);
    for (int trial = 0; trial < 25; ++trial) {
        const int64_t L = 20;
        std::vector<DenseTensor> patches;
        for (int64_t l = 0; l < L; ++l) {
            DenseTensor t({3, 3, 2});
            for (double& v : t.data) v = rng.uniform(0.0, 1.0);
            patches.push_back(std::move(t));
        }
        for (int64_t l = 0; l < L; ++l)
            CHECK(top_s_similar(patches, l, 5) == brute_force_top_s(patches, l, 5));
    }
}

TEST_CASE("top_s_similar rejects s > L-1") {
    std::vector<DenseTensor> patches(3, DenseTensor({1, 1, 1}));
    CHECK_THROWS_AS((void)top_s_similar(patches, 0, 3), std::invalid_argument);
    CHECK_THROWS_AS((void)top_s_similar(patches, 0, -1), std::invalid_argument);
}

TEST_CASE("group tensor stores the key patch in slot 0 and neighbors in rank order") {
    Rng rng(4);
    const int64_t L = 6, p = 3, n3 = 2, S = 2;
    std::vector<DenseTensor> patches;
    for (int64_t l = 0; l < L; ++l) {
        DenseTensor t({p, p, n3});
        for (double& v : t.data) v = rng.uniform(0.0, 1.0);
        patches.push_back(std::move(t));
    }
    const NonlocalIndex idx = build_index(patches, S);
    const DenseTensor tp = build_group_tensor(patches, idx);
    REQUIRE(tp.dims == std::vector<int64_t>{L, p, p, n3, S + 1});
    for (int64_t l = 0; l < L; ++l)
        for (int64_t m = 0; m <= S; ++m) {
            const int64_t src = m == 0 ? l : idx.groups[static_cast<size_t>(l)][static_cast<size_t>(m - 1)];
            for (int64_t i = 0; i < p; ++i)
                for (int64_t j = 0; j < p; ++j)
                    for (int64_t f = 0; f < n3; ++f)
                        CHECK(tp.at({l, i, j, f, m}) == patches[static_cast<size_t>(src)].at({i, j, f}));
        }
}

TEST_CASE("S=0 group tensor is just the stacked patches") {
    const DenseTensor x = random_stack(8, 8, 2, 5);
    const PatchGrid g = PatchGrid::make(8, 8, 4);
    const auto patches = split_patches(x, g);
    const NonlocalIndex idx = build_index(patches, 0);
    const DenseTensor tp = build_group_tensor(patches, idx);
    REQUIRE(tp.dims == std::vector<int64_t>{4, 4, 4, 2, 1});
    for (int64_t l = 0; l < 4; ++l)
        for (int64_t q = 0; q < 32; ++q) CHECK(tp[l * 32 + q] == patches[static_cast<size_t>(l)][q]);
}

TEST_CASE("scatter_back of a constant tensor is constant; S=0 inverts the grouping") {
    const PatchGrid g = PatchGrid::make(8, 6, 4);  // pads 6 -> 8 columns
    const DenseTensor x = random_stack(8, 6, 3, 6);
    const auto patches = split_patches(pad_reflect(x, g), g);

    const NonlocalIndex idx0 = build_index(patches, 0);
    const DenseTensor tp0 = build_group_tensor(patches, idx0);
    const DenseTensor back = scatter_back(tp0, idx0, g, {8, 6, 3});
    REQUIRE(back.dims == x.dims);
    for (int64_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-15));

    DenseTensor ctp(tp0.dims, 0.37);
    const NonlocalIndex idx1 = build_index(patches, 1);
    DenseTensor cgrp({tp0.dims[0], tp0.dims[1], tp0.dims[2], tp0.dims[3], 2}, 0.37);
    const DenseTensor cback = scatter_back(cgrp, idx1, g, {8, 6, 3});
    for (int64_t i = 0; i < cback.size(); ++i) CHECK(cback[i] == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("grouping then scatter_back is the identity on unmodified tensors") {
    const DenseTensor x = random_stack(9, 10, 3, 7);
    const PatchGrid g = PatchGrid::make(9, 10, 4);
    const auto patches = split_patches(pad_reflect(x, g), g);
    const NonlocalIndex idx = build_index(patches, 3);
    const DenseTensor tp = build_group_tensor(patches, idx);
    const DenseTensor back = scatter_back(tp, idx, g, {9, 10, 3});
    for (int64_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("scatter_back averages every occurrence (counting oracle)") {
    Rng rng(8);
    const PatchGrid g = PatchGrid::make(4, 8, 4);  // 1x2 grid of 4x4 patches
    const int64_t L = 2, p = 4, n3 = 2, S = 1;
    std::vector<DenseTensor> patches;
    for (int64_t l = 0; l < L; ++l) patches.push_back(random_stack(p, p, n3, 100 + static_cast<uint64_t>(l)));
    const NonlocalIndex idx = build_index(patches, S);
    DenseTensor tp({L, p, p, n3, S + 1});
    for (double& v : tp.data) v = rng.uniform(-1.0, 1.0);

    const DenseTensor out = scatter_back(tp, idx, g, {4, 8, 2});

    // occurrence-counting oracle
    for (int64_t j = 0; j < L; ++j) {
        std::vector<std::pair<int64_t, int64_t>> occ{{j, 0}};
        for (int64_t l = 0; l < L; ++l)
            for (int64_t m = 1; m <= S; ++m)
                if (idx.groups[static_cast<size_t>(l)][static_cast<size_t>(m - 1)] == j) occ.emplace_back(l, m);
        for (int64_t i = 0; i < p; ++i)
            for (int64_t jj = 0; jj < p; ++jj)
                for (int64_t f = 0; f < n3; ++f) {
                    double sum = 0.0;
                    for (const auto& [l, m] : occ) sum += tp.at({l, i, jj, f, m});
                    const double expect = sum / static_cast<double>(occ.size());
                    CHECK(out.at({i, j * p + jj, f}) == doctest::Approx(expect).epsilon(1e-13));
                }
    }

    // slot0-only mode keeps just each group's own patch
    const DenseTensor own = scatter_back(tp, idx, g, {4, 8, 2}, true);
    for (int64_t i = 0; i < p; ++i)
        for (int64_t jj = 0; jj < p; ++jj)
            for (int64_t f = 0; f < n3; ++f) {
                CHECK(own.at({i, jj, f}) == tp.at({0, i, jj, f, 0}));
                CHECK(own.at({i, p + jj, f}) == tp.at({1, i, jj, f, 0}));
            }
}

TEST_CASE("scatter_back validates shapes") {
    const PatchGrid g = PatchGrid::make(4, 4, 2);
    const NonlocalIndex idx{{{1}, {0}, {3}, {2}}};
    DenseTensor bad({4, 2, 2, 2, 2});
    CHECK_THROWS_AS((void)scatter_back(bad, idx, g, {5, 4, 2}), std::invalid_argument);
    DenseTensor bad2({3, 2, 2, 2, 2});
    CHECK_THROWS_AS((void)scatter_back(bad2, idx, g, {4, 4, 2}), std::invalid_argument);
}

TEST_CASE("coarse fit recovers an exactly low-rank target") {
    const int64_t n1 = 20, n2 = 16, n3 = 6;
    DenseTensor x({n1, n2, n3});
    for (int64_t i = 0; i < n1; ++i)
        for (int64_t j = 0; j < n2; ++j)
            for (int64_t f = 0; f < n3; ++f) {
                const double u = 0.55 + 0.3 * std::sin(2.0 * 3.14159265358979 * i / n1);
                const double v = 0.6 + 0.25 * std::cos(2.0 * 3.14159265358979 * j / n2);
                const double w = 0.7 + 0.2 * std::sin(2.0 * 3.14159265358979 * f / n3 + 0.5);
                x.at({i, j, f}) = u * v * w;
            }
    LrtfrConfig cfg;
    cfg.ranks = {4, 4, 3};
    cfg.iters = 1500;
    cfg.width = 64;
    cfg.seed = 21;
    const CoarseFitResult res = fit_coarse_background(x, cfg);
    double l1 = 0.0, mean_abs = 0.0;
    for (int64_t i = 0; i < x.size(); ++i) {
        l1 += std::fabs(res.background[i] - x[i]);
        mean_abs += std::fabs(x[i]);
    }
    mean_abs /= static_cast<double>(x.size());
    CHECK(l1 <= 1e-2 * static_cast<double>(x.size()) * mean_abs);
    for (double v : res.background.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("coarse fit keeps the best iterate, so the loss never exceeds the initial one") {
    DenseTensor x({8, 8, 4});  // all zero
    LrtfrConfig cfg;
    cfg.ranks = {3, 3, 2};
    cfg.iters = 50;
    cfg.width = 16;
    cfg.seed = 5;
    const CoarseFitResult res = fit_coarse_background(x, cfg);
    CHECK(res.best_loss <= res.init_loss);
}

TEST_CASE("l1 data loss shrugs off planted spikes, leaving them in the residual") {
    const int64_t n1 = 16, n2 = 16, n3 = 5;
    DenseTensor x({n1, n2, n3});
    for (int64_t i = 0; i < n1; ++i)
        for (int64_t j = 0; j < n2; ++j)
            for (int64_t f = 0; f < n3; ++f)
                x.at({i, j, f}) = 0.3 + 0.2 * std::sin(2.0 * 3.14159265 * i / n1) *
                                            std::cos(2.0 * 3.14159265 * j / n2);
    const std::vector<std::array<int64_t, 3>> spikes = {{3, 4, 1}, {10, 12, 2}, {7, 2, 4}};
    for (const auto& s : spikes) {
        double& v = x.at({s[0], s[1], s[2]});
        v = std::min(1.0, v + 1.0);
    }
    LrtfrConfig cfg;
    cfg.ranks = {3, 3, 2};
    cfg.iters = 1200;
    cfg.width = 64;
    cfg.seed = 9;
    const CoarseFitResult res = fit_coarse_background(x, cfg);
    std::vector<double> resid(static_cast<size_t>(x.size()));
    for (int64_t i = 0; i < x.size(); ++i) resid[static_cast<size_t>(i)] = std::fabs(x[i] - res.background[i]);
    std::vector<double> sorted = resid;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[sorted.size() / 2];
    for (const auto& s : spikes) {
        const int64_t flat = (s[0] * n2 + s[1]) * n3 + s[2];
        CHECK(resid[static_cast<size_t>(flat)] > 5.0 * med);
    }
}
