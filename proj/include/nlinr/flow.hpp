#pragma once

#include "nlinr/tensor.hpp"

namespace nlinr::flow {

/// Farneback dense optical flow configuration. `poly_n` is the full width of
/// the polynomial-expansion window; `winsize` the width of the averaging
/// window used when integrating the per-pixel displacement equations.
struct FlowConfig {
    double pyr_scale = 0.5;
    int levels = 3;
    int winsize = 15;
    int iterations = 3;
    int poly_n = 5;
    double poly_sigma = 1.1;

    void validate() const;
};

/// Per-pixel displacement maps, in pixels per frame. dx is horizontal
/// (column) motion, dy vertical (row) motion, from `prev` to `next`.
struct FlowField {
    Matrix dx, dy;
};

/// Dense flow by quadratic polynomial expansion over a Gaussian-weighted
/// neighborhood, refined coarse-to-fine over an image pyramid.
FlowField farneback(const Matrix& prev, const Matrix& next, const FlowConfig& cfg = {});

/// Elementwise Euclidean magnitude sqrt(dx^2 + dy^2).
Matrix flow_magnitude(const FlowField& f);

/// Per-frame magnitude maps for a stack; frame 0 has no predecessor and gets
/// a zero map, frame f >= 1 uses the pair (f-1, f).
DenseTensor magnitude_stack(const DenseTensor& frames, const FlowConfig& cfg = {});

/// Divide by the max over the whole stack (no-op when the max is zero) so
/// magnitudes blend with [0,1] images on a comparable scale.
void normalize_by_global_max(DenseTensor& mags);

/// Confidence-weighted multi-frame fusion. For frame f with peak magnitude m:
/// alpha = m/(m+beta), fused_f = alpha*M_f + (1-alpha)*mean(M_{f-1}..M_{f-k});
/// frames with fewer than k predecessors average over the available ones and
/// frame 0 passes through unchanged.
DenseTensor dynamic_fuse(const DenseTensor& mags, int k, double beta);

/// Blend the input stack with the fused motion map: (1-gamma)*d + gamma*fused.
DenseTensor motion_enhance(const DenseTensor& d, const DenseTensor& fused, double gamma);

struct FlowStack {
    DenseTensor mags;
    DenseTensor fused;
};

FlowStack compute_flow_stack(const DenseTensor& frames, const FlowConfig& cfg, int k,
                             double beta, bool normalize);

// stack helpers shared with the pipeline
Matrix frame_of(const DenseTensor& stack, int64_t f);
void set_frame(DenseTensor& stack, int64_t f, const Matrix& img);

}  // namespace nlinr::flow
