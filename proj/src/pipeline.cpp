#include "nlinr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "nlinr/image_io.hpp"
#include "nlinr/nlt1.hpp"
#include "nlinr/parallel.hpp"
#include "nlinr/rng.hpp"

namespace fs = std::filesystem;

namespace nlinr::pipeline {

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
    }
}

int64_t parse_int(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return static_cast<int64_t>(i);
    } catch (...) {
        throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "on") return true;
    if (v == "0" || v == "false" || v == "off") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

std::vector<int64_t> parse_list(const std::string& v, const std::string& key, size_t want) {
    std::vector<int64_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_int(trim(item), key));
    if (out.size() != want)
        throw std::invalid_argument("config: " + key + " needs " + std::to_string(want) + " entries");
    return out;
}

}  // namespace

void PipelineConfig::set(const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("config: expected key=value, got '" + assignment + "'");
    const std::string key = trim(assignment.substr(0, eq));
    const std::string val = trim(assignment.substr(eq + 1));
    if (key.empty() || val.empty())
        throw std::invalid_argument("config: empty key or value in '" + assignment + "'");

    if (key == "flow.pyr_scale") flow_cfg.pyr_scale = parse_double(val, key);
    else if (key == "flow.levels") flow_cfg.levels = static_cast<int>(parse_int(val, key));
    else if (key == "flow.winsize") flow_cfg.winsize = static_cast<int>(parse_int(val, key));
    else if (key == "flow.iterations") flow_cfg.iterations = static_cast<int>(parse_int(val, key));
    else if (key == "flow.poly_n") flow_cfg.poly_n = static_cast<int>(parse_int(val, key));
    else if (key == "flow.poly_sigma") flow_cfg.poly_sigma = parse_double(val, key);
    else if (key == "flow.normalize") flow_normalize = parse_bool(val, key);
    else if (key == "fuse.k") fuse_k = static_cast<int>(parse_int(val, key));
    else if (key == "fuse.beta") fuse_beta = parse_double(val, key);
    else if (key == "enhance.gamma") gamma = parse_double(val, key);
    else if (key == "patch.p") patch = parse_int(val, key);
    else if (key == "patch.s") similar = parse_int(val, key);
    else if (key == "coarse.ranks") {
        const auto r = parse_list(val, key, 3);
        coarse.ranks = {r[0], r[1], r[2]};
    } else if (key == "coarse.iters") coarse.iters = static_cast<int>(parse_int(val, key));
    else if (key == "coarse.lr") coarse.lr = parse_double(val, key);
    else if (key == "coarse.width") coarse.width = static_cast<int>(parse_int(val, key));
    else if (key == "coarse.depth") coarse.depth = static_cast<int>(parse_int(val, key));
    else if (key == "coarse.omega") coarse.omega = parse_double(val, key);
    else if (key == "inr.ranks") {
        const auto r = parse_list(val, key, 4);
        solver.inr.ranks = {r[0], r[1], r[2], r[3]};
    } else if (key == "inr.width") solver.inr.width = static_cast<int>(parse_int(val, key));
    else if (key == "inr.depth") solver.inr.depth = static_cast<int>(parse_int(val, key));
    else if (key == "inr.omega") solver.inr.omega = parse_double(val, key);
    else if (key == "solver.lambda") solver.lambda_sparse = parse_double(val, key);
    else if (key == "solver.phi") solver.phi = parse_double(val, key);
    else if (key == "solver.eta") solver.eta = parse_double(val, key);
    else if (key == "solver.rho0") solver.rho0 = parse_double(val, key);
    else if (key == "solver.kappa") solver.kappa = parse_double(val, key);
    else if (key == "solver.inner_steps") solver.inner_steps = static_cast<int>(parse_int(val, key));
    else if (key == "solver.max_outer") solver.max_outer = static_cast<int>(parse_int(val, key));
    else if (key == "solver.tol") solver.tol = parse_double(val, key);
    else if (key == "solver.primal_tol") solver.primal_tol = parse_double(val, key);
    else if (key == "solver.adam_lr") solver.adam_lr = parse_double(val, key);
    else if (key == "binarize.tr") binarize_tr = parse_double(val, key);
    else if (key == "eval.match_radius") match_radius = parse_double(val, key);
    else if (key == "scatter.slot0_only") scatter_slot0_only = parse_bool(val, key);
    else if (key == "seed") seed = static_cast<uint64_t>(parse_int(val, key));
    else if (key == "threads") threads = static_cast<int>(parse_int(val, key));
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

void PipelineConfig::validate() const {
    flow_cfg.validate();
    if (fuse_k < 0) throw std::invalid_argument("config: fuse.k must be >= 0");
    if (!(fuse_beta > 0.0)) throw std::invalid_argument("config: fuse.beta must be > 0");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("config: gamma must be in [0,1]");
    if (patch < 1) throw std::invalid_argument("config: patch.p must be >= 1");
    if (similar < 0) throw std::invalid_argument("config: patch.s must be >= 0");
    if (coarse.iters < 1) throw std::invalid_argument("config: coarse.iters must be >= 1");
    if (coarse.lr <= 0.0) throw std::invalid_argument("config: coarse.lr must be > 0");
    solver.validate();
    if (!(binarize_tr > 0.0 && binarize_tr <= 1.0))
        throw std::invalid_argument("config: binarize.tr must be in (0,1]");
    if (!(match_radius > 0.0)) throw std::invalid_argument("config: eval.match_radius must be > 0");
    if (threads < 0) throw std::invalid_argument("config: threads must be >= 0");
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open config: " + path);
    PipelineConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        try {
            cfg.set(t);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

void PipelineConfig::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open config for write: " + path);
    os << "flow.pyr_scale = " << flow_cfg.pyr_scale << "\n";
    os << "flow.levels = " << flow_cfg.levels << "\n";
    os << "flow.winsize = " << flow_cfg.winsize << "\n";
    os << "flow.iterations = " << flow_cfg.iterations << "\n";
    os << "flow.poly_n = " << flow_cfg.poly_n << "\n";
    os << "flow.poly_sigma = " << flow_cfg.poly_sigma << "\n";
    os << "flow.normalize = " << (flow_normalize ? 1 : 0) << "\n";
    os << "fuse.k = " << fuse_k << "\n";
    os << "fuse.beta = " << fuse_beta << "\n";
    os << "enhance.gamma = " << gamma << "\n";
    os << "patch.p = " << patch << "\n";
    os << "patch.s = " << similar << "\n";
    os << "coarse.ranks = " << coarse.ranks[0] << "," << coarse.ranks[1] << "," << coarse.ranks[2] << "\n";
    os << "coarse.iters = " << coarse.iters << "\n";
    os << "coarse.lr = " << coarse.lr << "\n";
    os << "coarse.width = " << coarse.width << "\n";
    os << "coarse.depth = " << coarse.depth << "\n";
    os << "coarse.omega = " << coarse.omega << "\n";
    os << "inr.ranks = " << solver.inr.ranks[0] << "," << solver.inr.ranks[1] << ","
       << solver.inr.ranks[2] << "," << solver.inr.ranks[3] << "\n";
    os << "inr.width = " << solver.inr.width << "\n";
    os << "inr.depth = " << solver.inr.depth << "\n";
    os << "inr.omega = " << solver.inr.omega << "\n";
    os << "solver.lambda = " << solver.lambda_sparse << "\n";
    os << "solver.phi = " << solver.phi << "\n";
    os << "solver.eta = " << solver.eta << "\n";
    os << "solver.rho0 = " << solver.rho0 << "\n";
    os << "solver.kappa = " << solver.kappa << "\n";
    os << "solver.inner_steps = " << solver.inner_steps << "\n";
    os << "solver.max_outer = " << solver.max_outer << "\n";
    os << "solver.tol = " << solver.tol << "\n";
    os << "solver.primal_tol = " << solver.primal_tol << "\n";
    os << "solver.adam_lr = " << solver.adam_lr << "\n";
    os << "binarize.tr = " << binarize_tr << "\n";
    os << "eval.match_radius = " << match_radius << "\n";
    os << "scatter.slot0_only = " << (scatter_slot0_only ? 1 : 0) << "\n";
    os << "seed = " << seed << "\n";
    os << "threads = " << threads << "\n";
}

DetectionOutputs run_detect(const PipelineConfig& cfg, const DenseTensor& frames,
                            const metrics::MaskStack* gt) {
    cfg.validate();
    if (frames.ndim() != 3) throw std::invalid_argument("detect: need a 3-way frame stack");
    if (!all_finite(frames)) throw numeric_error("detect: non-finite input frames");
    set_num_threads(cfg.threads);

    const int64_t n1 = frames.dims[0], n2 = frames.dims[1], n3 = frames.dims[2];

    // motion enhancement; gamma = 0 blends nothing, so the flow pass is skipped
    DenseTensor enhanced;
    if (cfg.gamma > 0.0) {
        const flow::FlowStack fs =
            flow::compute_flow_stack(frames, cfg.flow_cfg, cfg.fuse_k, cfg.fuse_beta, cfg.flow_normalize);
        enhanced = flow::motion_enhance(frames, fs.fused, cfg.gamma);
    } else {
        enhanced = frames;
    }

    // coarse background for the nonlocal search
    grouping::LrtfrConfig coarse_cfg = cfg.coarse;
    coarse_cfg.seed = mix_seed(cfg.seed, 7);
    const grouping::CoarseFitResult coarse = grouping::fit_coarse_background(enhanced, coarse_cfg);

    const grouping::PatchGrid grid = grouping::PatchGrid::make(n1, n2, cfg.patch);
    const std::vector<DenseTensor> patches = grouping::split_patches(grouping::pad_reflect(enhanced, grid), grid);
    const std::vector<DenseTensor> coarse_patches =
        grouping::split_patches(grouping::pad_reflect(coarse.background, grid), grid);
    const int64_t s_eff = std::min<int64_t>(cfg.similar, grid.patches() - 1);
    const grouping::NonlocalIndex index = grouping::build_index(coarse_patches, s_eff);
    const DenseTensor xp = grouping::build_group_tensor(patches, index);

    admm::SolverConfig solver_cfg = cfg.solver;
    solver_cfg.seed = mix_seed(cfg.seed, 11);
    admm::SolveResult sol;
    try {
        sol = admm::solve(xp, solver_cfg);
    } catch (const numeric_error& e) {
        throw numeric_error(std::string("detect: solver stage failed: ") + e.what());
    }

    DetectionOutputs out;
    out.target = grouping::scatter_back(sol.target, index, grid, {n1, n2, n3}, cfg.scatter_slot0_only);
    out.masks = metrics::binarize(out.target, cfg.binarize_tr);
    out.re_history = sol.re_history;
    out.converged = sol.converged;
    out.iterations = sol.iterations;
    if (gt) out.report = metrics::evaluate(out.masks, *gt, cfg.match_radius);
    return out;
}

DetectionOutputs run_detect_files(const PipelineConfig& cfg, const std::string& input,
                                  const std::string& gt_dir, const std::string& out_dir) {
    const DenseTensor frames = load_sequence(input);
    std::optional<metrics::MaskStack> gt;
    if (!gt_dir.empty()) {
        const DenseTensor gt_stack = load_sequence(gt_dir);
        if (gt_stack.dims != frames.dims) throw io_error("detect: GT shape differs from input");
        gt = metrics::mask_from_tensor(gt_stack);
    }

    DetectionOutputs out = run_detect(cfg, frames, gt ? &*gt : nullptr);

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        save_nlt1((fs::path(out_dir) / "target.nlt1").string(), out.target);
        save_sequence((fs::path(out_dir) / "masks").string(), metrics::mask_to_tensor(out.masks));
        if (out.report) metrics::write_report_csv((fs::path(out_dir) / "metrics.csv").string(), *out.report);
        std::ofstream re((fs::path(out_dir) / "re_history.csv").string());
        re << "t,re\n";
        for (size_t i = 0; i < out.re_history.size(); ++i)
            re << (i + 1) << "," << out.re_history[i] << "\n";
    }
    return out;
}

}  // namespace nlinr::pipeline
