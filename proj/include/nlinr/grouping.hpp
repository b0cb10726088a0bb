#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "nlinr/tensor.hpp"

namespace nlinr::grouping {

/// Non-overlapping patch layout over a (possibly reflect-padded) image plane.
struct PatchGrid {
    int64_t p = 0;          // patch side
    int64_t rows = 0, cols = 0;
    int64_t pad_rows = 0, pad_cols = 0;  // rows/cols appended to reach divisibility

    int64_t patches() const { return rows * cols; }

    static PatchGrid make(int64_t n1, int64_t n2, int64_t p);
};

/// Per-key-patch list of the indices of its most similar patches.
struct NonlocalIndex {
    std::vector<std::vector<int64_t>> groups;

    int64_t similar() const { return groups.empty() ? 0 : static_cast<int64_t>(groups.front().size()); }
};

/// Edge-inclusive mirror padding of the two spatial axes up to the grid size.
DenseTensor pad_reflect(const DenseTensor& x, const PatchGrid& grid);

/// Lexicographic (row-major over the patch grid) list of p x p x n3 patches.
std::vector<DenseTensor> split_patches(const DenseTensor& x, const PatchGrid& grid);

/// Inverse of split_patches (up to the padding, which stays in place).
DenseTensor stitch_patches(const std::vector<DenseTensor>& patches, const PatchGrid& grid);

/// Indices of the s patches closest to patch `l` in Frobenius distance,
/// ascending by distance, ties broken by ascending index, `l` excluded.
std::vector<int64_t> top_s_similar(const std::vector<DenseTensor>& patches, int64_t l, int64_t s);

NonlocalIndex build_index(const std::vector<DenseTensor>& coarse_patches, int64_t s);

/// Aggregate into the 5-way tensor L x p x p x n3 x (S+1); slot 0 of group l
/// is patch l itself, slots 1..S its similar patches in ranked order.
DenseTensor build_group_tensor(const std::vector<DenseTensor>& patches, const NonlocalIndex& index);

/// Average every occurrence of each base patch (its own slot 0 plus every
/// slot where another group references it) back into image space, then crop
/// the padding. With slot0_only, only each group's own slot is used.
DenseTensor scatter_back(const DenseTensor& tp, const NonlocalIndex& index, const PatchGrid& grid,
                         const std::array<int64_t, 3>& dims, bool slot0_only = false);

/// Coarse background fit: a 3-way Tucker model with sine-activated factor
/// nets, trained on a smoothed l1 data loss with Adam.
struct LrtfrConfig {
    std::array<int64_t, 3> ranks{8, 8, 6};
    int iters = 500;
    double lr = 1e-3;
    int width = 128;
    int depth = 3;
    double omega = 30.0;
    uint64_t seed = 0;
};

struct CoarseFitResult {
    DenseTensor background;  // clamped to [0,1]
    double init_loss = 0.0;
    double best_loss = 0.0;
};

CoarseFitResult fit_coarse_background(const DenseTensor& x, const LrtfrConfig& cfg);

}  // namespace nlinr::grouping
