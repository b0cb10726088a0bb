#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "nlinr/metrics.hpp"
#include "nlinr/tensor.hpp"

namespace nlinr::synthetic {

/// One moving Gaussian blob: position (row, col) at frame 0, velocity in
/// pixels per frame, peak amplitude, and radius ~ 2 sigma of the blob.
struct TargetSpec {
    double row0 = 0.0, col0 = 0.0;
    double vrow = 0.0, vcol = 0.0;
    double amplitude = 0.6;
    double radius = 2.0;
};

struct SceneSpec {
    int64_t n1 = 64, n2 = 64, n3 = 16;
    std::array<int64_t, 3> bg_ranks{4, 4, 3};
    double bg_low = 0.10, bg_high = 0.35;  // intensity band of the background
    double noise_sigma = 0.01;
    std::vector<TargetSpec> targets;

    void validate() const;
};

struct Scene {
    DenseTensor frames;       // clamped to [0,1]
    metrics::MaskStack gt;    // pixels whose clean target contribution > amp/2
};

/// Low-rank smooth background + rendered targets + i.i.d. Gaussian noise.
/// Throws when a target trajectory leaves the frame.
Scene generate_scene(const SceneSpec& spec, uint64_t seed);

/// The stock 64 x 64 x 16 scene used by the end-to-end checks: one target of
/// amplitude 0.6 moving 1 px/frame, noise sigma 0.01.
SceneSpec default_scene();

/// Three faster targets (2 px/frame) in the same 64 x 64 x 16 footprint.
SceneSpec three_target_scene();

}  // namespace nlinr::synthetic
