#pragma once

#include <optional>
#include <string>

#include "nlinr/admm.hpp"
#include "nlinr/flow.hpp"
#include "nlinr/grouping.hpp"
#include "nlinr/metrics.hpp"
#include "nlinr/tensor.hpp"

namespace nlinr::pipeline {

/// Every knob of the detection pipeline, loadable from a flat `key = value`
/// file with `--set key=value` overrides.
struct PipelineConfig {
    flow::FlowConfig flow_cfg;
    bool flow_normalize = true;
    int fuse_k = 4;
    double fuse_beta = 0.1;
    double gamma = 0.05;

    int64_t patch = 64;
    int64_t similar = 5;  // clipped to L-1 at run time

    grouping::LrtfrConfig coarse;
    admm::SolverConfig solver;

    double binarize_tr = 0.4;
    double match_radius = 3.0;
    bool scatter_slot0_only = false;

    uint64_t seed = 0;
    int threads = 0;

    void validate() const;

    /// Apply one `key=value` assignment; unknown keys throw invalid_argument.
    void set(const std::string& assignment);

    static PipelineConfig load(const std::string& path);
    void save(const std::string& path) const;
};

struct DetectionOutputs {
    DenseTensor target;            // n1 x n2 x n3
    metrics::MaskStack masks;
    std::optional<metrics::MetricReport> report;
    std::vector<double> re_history;
    bool converged = false;
    int iterations = 0;
};

/// The full chain: motion enhancement, coarse fit, nonlocal grouping, the
/// ADMM separation, scatter-back and binarization. Deterministic per
/// (config, seed).
DetectionOutputs run_detect(const PipelineConfig& cfg, const DenseTensor& frames,
                            const metrics::MaskStack* gt = nullptr);

/// File-level wrapper: loads the input sequence, runs detection, writes
/// target.nlt1, masks/frame_%04d.pgm, re_history.csv and (given GT)
/// metrics.csv under out_dir.
DetectionOutputs run_detect_files(const PipelineConfig& cfg, const std::string& input,
                                  const std::string& gt_dir, const std::string& out_dir);

}  // namespace nlinr::pipeline
