#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nlinr/tensor.hpp"

namespace nlinr::metrics {

/// One boolean frame.
struct BinaryMask {
    int64_t n1 = 0, n2 = 0;
    std::vector<uint8_t> m;

    BinaryMask() = default;
    BinaryMask(int64_t r, int64_t c) : n1(r), n2(c), m(static_cast<size_t>(r * c), 0) {}
    bool at(int64_t i, int64_t j) const { return m[static_cast<size_t>(i * n2 + j)] != 0; }
    void set(int64_t i, int64_t j, bool v) { m[static_cast<size_t>(i * n2 + j)] = v ? 1 : 0; }
};

using MaskStack = std::vector<BinaryMask>;

/// Threshold relative to the sequence max: pixel true iff |t| >= tr * max|t|
/// (and the sequence max is nonzero, so an all-zero tensor gives empty masks).
MaskStack binarize(const DenseTensor& t, double tr);

/// Absolute-threshold variant for sweeps: true iff |t| >= tr_abs.
MaskStack binarize_abs(const DenseTensor& t, double tr_abs);

struct Component {
    std::vector<std::pair<int64_t, int64_t>> pixels;
    double cy = 0.0, cx = 0.0;  // centroid in pixel coordinates
};

/// 8-connectivity labeling of one frame.
std::vector<Component> connected_components(const BinaryMask& mask);

/// Pixel-level (IoU, F1) with TP/FP/FN counted over all frames.
/// Empty prediction and empty ground truth count as a perfect match.
std::pair<double, double> pixel_metrics(const MaskStack& pred, const MaskStack& gt);

/// Target-level (Pd, Fa). A GT component counts as detected when some
/// predicted component centroid lies within match_radius of its centroid or
/// overlaps it in pixels. Fa is predicted-true pixels outside every GT
/// component, over all pixels in the sequence.
std::pair<double, double> target_metrics(const MaskStack& pred, const MaskStack& gt,
                                         double match_radius);

struct FrameCounts {
    int64_t frame = 0, tp = 0, fp = 0, fn = 0;
    double iou = 0.0, f1 = 0.0;
};

struct MetricReport {
    double iou = 0.0, f1 = 0.0, pd = 0.0, fa = 0.0;  // raw fractions
    std::vector<FrameCounts> frames;
};

MetricReport evaluate(const MaskStack& pred, const MaskStack& gt, double match_radius);

/// Serialize per-frame counts plus a summary row scaled the way sequence
/// tables usually report them (IoU/F1/Pd x 1e-2, Fa x 1e-5).
void write_report_csv(const std::string& path, const MetricReport& report);

// mask <-> tensor conversions (nonzero = true; masks save as 0/255)
MaskStack mask_from_tensor(const DenseTensor& t);
DenseTensor mask_to_tensor(const MaskStack& masks);

}  // namespace nlinr::metrics
