#include "nlinr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace nlinr::metrics {

namespace {

void check_stack(const DenseTensor& t) {
    if (t.ndim() != 3) throw std::invalid_argument("binarize: need a 3-way tensor");
    if (!all_finite(t)) throw std::invalid_argument("binarize: non-finite input");
}

MaskStack threshold_stack(const DenseTensor& t, double thresh, bool any_positive) {
    const int64_t n1 = t.dims[0], n2 = t.dims[1], n3 = t.dims[2];
    MaskStack masks(static_cast<size_t>(n3), BinaryMask(n1, n2));
    if (!any_positive) return masks;
    for (int64_t i = 0; i < n1; ++i)
        for (int64_t j = 0; j < n2; ++j)
            for (int64_t f = 0; f < n3; ++f)
                if (std::fabs(t.data[static_cast<size_t>((i * n2 + j) * n3 + f)]) >= thresh)
                    masks[static_cast<size_t>(f)].set(i, j, true);
    return masks;
}

}  // namespace

MaskStack binarize(const DenseTensor& t, double tr) {
    check_stack(t);
    if (!(tr > 0.0 && tr <= 1.0)) throw std::invalid_argument("binarize: tr must be in (0,1]");
    double mx = 0.0;
    for (double v : t.data) mx = std::max(mx, std::fabs(v));
    return threshold_stack(t, tr * mx, mx > 0.0);
}

MaskStack binarize_abs(const DenseTensor& t, double tr_abs) {
    check_stack(t);
    if (!(tr_abs > 0.0)) throw std::invalid_argument("binarize_abs: threshold must be > 0");
    return threshold_stack(t, tr_abs, true);
}

std::vector<Component> connected_components(const BinaryMask& mask) {
    std::vector<Component> comps;
    std::vector<uint8_t> seen(mask.m.size(), 0);
    std::vector<std::pair<int64_t, int64_t>> stack;
    for (int64_t i = 0; i < mask.n1; ++i)
        for (int64_t j = 0; j < mask.n2; ++j) {
            if (!mask.at(i, j) || seen[static_cast<size_t>(i * mask.n2 + j)]) continue;
            Component c;
            stack.clear();
            stack.emplace_back(i, j);
            seen[static_cast<size_t>(i * mask.n2 + j)] = 1;
            while (!stack.empty()) {
                const auto [y, x] = stack.back();
                stack.pop_back();
                c.pixels.emplace_back(y, x);
                for (int64_t dy = -1; dy <= 1; ++dy)
                    for (int64_t dx = -1; dx <= 1; ++dx) {
                        if (dy == 0 && dx == 0) continue;
                        const int64_t ny = y + dy, nx = x + dx;
                        if (ny < 0 || ny >= mask.n1 || nx < 0 || nx >= mask.n2) continue;
                        if (!mask.at(ny, nx) || seen[static_cast<size_t>(ny * mask.n2 + nx)]) continue;
                        seen[static_cast<size_t>(ny * mask.n2 + nx)] = 1;
                        stack.emplace_back(ny, nx);
                    }
            }
            double sy = 0.0, sx = 0.0;
            for (const auto& [y, x] : c.pixels) {
                sy += static_cast<double>(y);
                sx += static_cast<double>(x);
            }
            c.cy = sy / static_cast<double>(c.pixels.size());
            c.cx = sx / static_cast<double>(c.pixels.size());
            comps.push_back(std::move(c));
        }
    return comps;
}

namespace {

void check_same_shape(const MaskStack& pred, const MaskStack& gt) {
    if (pred.size() != gt.size()) throw std::invalid_argument("metrics: frame count mismatch");
    for (size_t f = 0; f < pred.size(); ++f)
        if (pred[f].n1 != gt[f].n1 || pred[f].n2 != gt[f].n2)
            throw std::invalid_argument("metrics: mask shape mismatch");
}

}  // namespace

std::pair<double, double> pixel_metrics(const MaskStack& pred, const MaskStack& gt) {
    check_same_shape(pred, gt);
    int64_t tp = 0, fp = 0, fn = 0;
    for (size_t f = 0; f < pred.size(); ++f)
        for (size_t i = 0; i < pred[f].m.size(); ++i) {
            const bool p = pred[f].m[i] != 0, g = gt[f].m[i] != 0;
            tp += p && g;
            fp += p && !g;
            fn += !p && g;
        }
    if (tp + fp + fn == 0) return {1.0, 1.0};  // nothing predicted, nothing to find
    const double iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    return {iou, f1};
}

std::pair<double, double> target_metrics(const MaskStack& pred, const MaskStack& gt,
                                         double match_radius) {
    check_same_shape(pred, gt);
    if (!(match_radius > 0.0)) throw std::invalid_argument("target_metrics: match_radius must be > 0");
    int64_t gt_total = 0, gt_detected = 0, false_pixels = 0, total_pixels = 0;
    for (size_t f = 0; f < pred.size(); ++f) {
        const std::vector<Component> pc = connected_components(pred[f]);
        const std::vector<Component> gc = connected_components(gt[f]);
        gt_total += static_cast<int64_t>(gc.size());
        total_pixels += pred[f].n1 * pred[f].n2;

        // label map of the GT components for the overlap test
        std::vector<int32_t> label(static_cast<size_t>(pred[f].n1 * pred[f].n2), -1);
        for (size_t gi = 0; gi < gc.size(); ++gi)
            for (const auto& [y, x] : gc[gi].pixels)
                label[static_cast<size_t>(y * pred[f].n2 + x)] = static_cast<int32_t>(gi);

        std::vector<uint8_t> hit(gc.size(), 0);
        for (const Component& p : pc) {
            for (size_t gi = 0; gi < gc.size(); ++gi)
                if (std::hypot(p.cy - gc[gi].cy, p.cx - gc[gi].cx) <= match_radius) hit[gi] = 1;
            for (const auto& [y, x] : p.pixels) {
                const int32_t gi = label[static_cast<size_t>(y * pred[f].n2 + x)];
                if (gi >= 0) hit[static_cast<size_t>(gi)] = 1;
            }
        }
        for (uint8_t h : hit) gt_detected += h;

        // predicted-true pixels outside every GT component
        for (int64_t i = 0; i < pred[f].n1; ++i)
            for (int64_t j = 0; j < pred[f].n2; ++j)
                if (pred[f].at(i, j) && !gt[f].at(i, j)) ++false_pixels;
    }
    if (gt_total == 0)
        throw std::invalid_argument("target_metrics: no ground-truth components in the sequence (Pd undefined)");
    const double pd = static_cast<double>(gt_detected) / static_cast<double>(gt_total);
    const double fa = static_cast<double>(false_pixels) / static_cast<double>(total_pixels);
    return {pd, fa};
}

MetricReport evaluate(const MaskStack& pred, const MaskStack& gt, double match_radius) {
    check_same_shape(pred, gt);
    MetricReport rep;
    for (size_t f = 0; f < pred.size(); ++f) {
        FrameCounts fc;
        fc.frame = static_cast<int64_t>(f);
        for (size_t i = 0; i < pred[f].m.size(); ++i) {
            const bool p = pred[f].m[i] != 0, g = gt[f].m[i] != 0;
            fc.tp += p && g;
            fc.fp += p && !g;
            fc.fn += !p && g;
        }
        if (fc.tp + fc.fp + fc.fn == 0) {
            fc.iou = fc.f1 = 1.0;
        } else {
            fc.iou = static_cast<double>(fc.tp) / static_cast<double>(fc.tp + fc.fp + fc.fn);
            fc.f1 = 2.0 * static_cast<double>(fc.tp) / static_cast<double>(2 * fc.tp + fc.fp + fc.fn);
        }
        rep.frames.push_back(fc);
    }
    const auto [iou, f1] = pixel_metrics(pred, gt);
    rep.iou = iou;
    rep.f1 = f1;
    const auto [pd, fa] = target_metrics(pred, gt, match_radius);
    rep.pd = pd;
    rep.fa = fa;
    return rep;
}

void write_report_csv(const std::string& path, const MetricReport& report) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open for write: " + path);
    os << "frame,tp,fp,fn,iou,f1\n";
    for (const FrameCounts& fc : report.frames)
        os << fc.frame << "," << fc.tp << "," << fc.fp << "," << fc.fn << "," << fc.iou << ","
           << fc.f1 << "\n";
    os << "\n";
    os << "sequence,iou_x1e-2,f1_x1e-2,pd_x1e-2,fa_x1e-5\n";
    os << "summary," << report.iou * 100.0 << "," << report.f1 * 100.0 << "," << report.pd * 100.0
       << "," << report.fa * 1e5 << "\n";
    if (!os) throw io_error("report: write failed: " + path);
}

MaskStack mask_from_tensor(const DenseTensor& t) {
    check_stack(t);
    const int64_t n1 = t.dims[0], n2 = t.dims[1], n3 = t.dims[2];
    MaskStack masks(static_cast<size_t>(n3), BinaryMask(n1, n2));
    for (int64_t i = 0; i < n1; ++i)
        for (int64_t j = 0; j < n2; ++j)
            for (int64_t f = 0; f < n3; ++f)
                if (std::fabs(t.data[static_cast<size_t>((i * n2 + j) * n3 + f)]) > 0.5)
                    masks[static_cast<size_t>(f)].set(i, j, true);
    return masks;
}

DenseTensor mask_to_tensor(const MaskStack& masks) {
    if (masks.empty()) throw std::invalid_argument("mask_to_tensor: empty stack");
    const int64_t n1 = masks[0].n1, n2 = masks[0].n2, n3 = static_cast<int64_t>(masks.size());
    DenseTensor t({n1, n2, n3});
    for (int64_t f = 0; f < n3; ++f)
        for (int64_t i = 0; i < n1; ++i)
            for (int64_t j = 0; j < n2; ++j)
                t.data[static_cast<size_t>((i * n2 + j) * n3 + f)] = masks[static_cast<size_t>(f)].at(i, j) ? 1.0 : 0.0;
    return t;
}

}  // namespace nlinr::metrics
