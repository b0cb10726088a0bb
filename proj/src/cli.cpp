#include "nlinr/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nlinr/image_io.hpp"
#include "nlinr/metrics.hpp"
#include "nlinr/nlt1.hpp"
#include "nlinr/parallel.hpp"
#include "nlinr/pipeline.hpp"
#include "nlinr/synthetic.hpp"

namespace fs = std::filesystem;

namespace nlinr {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

struct CommonOpts {
    std::string config;
    std::vector<std::string> sets;
    int threads = -1;  // -1: take the config value
};

pipeline::PipelineConfig make_config(const CommonOpts& opt) {
    pipeline::PipelineConfig cfg;
    if (!opt.config.empty()) cfg = pipeline::PipelineConfig::load(opt.config);
    for (const std::string& s : opt.sets) cfg.set(s);
    if (opt.threads >= 0) cfg.threads = opt.threads;
    cfg.validate();
    return cfg;
}

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

synthetic::SceneSpec load_scene_spec(const std::string& path, uint64_t* seed) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open scene spec: " + path);
    synthetic::SceneSpec spec;
    spec.targets.clear();
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        const std::string val = trim(t.substr(eq + 1));
        std::istringstream vs(val);
        auto want = [&](bool ok) {
            if (!ok)
                throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": bad value for " + key);
        };
        if (key == "n1") want(static_cast<bool>(vs >> spec.n1));
        else if (key == "n2") want(static_cast<bool>(vs >> spec.n2));
        else if (key == "n3") want(static_cast<bool>(vs >> spec.n3));
        else if (key == "bg_ranks") {
            char c1 = 0, c2 = 0;
            want(static_cast<bool>(vs >> spec.bg_ranks[0] >> c1 >> spec.bg_ranks[1] >> c2 >> spec.bg_ranks[2]) &&
                 c1 == ',' && c2 == ',');
        } else if (key == "bg_low") want(static_cast<bool>(vs >> spec.bg_low));
        else if (key == "bg_high") want(static_cast<bool>(vs >> spec.bg_high));
        else if (key == "noise_sigma") want(static_cast<bool>(vs >> spec.noise_sigma));
        else if (key == "seed") {
            uint64_t s = 0;
            want(static_cast<bool>(vs >> s));
            if (seed) *seed = s;
        } else if (key == "target") {
            synthetic::TargetSpec tg;
            char c[5] = {};
            want(static_cast<bool>(vs >> tg.row0 >> c[0] >> tg.col0 >> c[1] >> tg.vrow >> c[2] >>
                                   tg.vcol >> c[3] >> tg.amplitude >> c[4] >> tg.radius));
            for (char ch : c) want(ch == ',');
            spec.targets.push_back(tg);
        } else {
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    return spec;
}

int cmd_detect(const CommonOpts& common, const std::string& input, const std::string& gt,
               const std::string& out, const std::string& dump) {
    pipeline::PipelineConfig cfg = make_config(common);
    if (!dump.empty()) cfg.solver.dump_dir = dump;
    const pipeline::DetectionOutputs res = pipeline::run_detect_files(cfg, input, gt, out);
    std::cout << "detect: " << res.iterations << " outer iterations, "
              << (res.converged ? "converged" : "stopped at the iteration cap") << "\n";
    if (res.report) {
        std::cout << "IoU(1e-2) " << res.report->iou * 100.0 << "  F1(1e-2) " << res.report->f1 * 100.0
                  << "  Pd(1e-2) " << res.report->pd * 100.0 << "  Fa(1e-5) " << res.report->fa * 1e5
                  << "\n";
    }
    if (!res.converged) std::cout << "warning: relative error did not reach tol\n";
    return kExitOk;
}

int cmd_synth(const std::string& spec_path, const std::string& out, uint64_t seed_flag, bool seed_set) {
    uint64_t seed = 0;
    synthetic::SceneSpec spec = load_scene_spec(spec_path, &seed);
    if (seed_set) seed = seed_flag;
    const synthetic::Scene scene = synthetic::generate_scene(spec, seed);
    save_sequence((fs::path(out) / "frames").string(), scene.frames);
    save_sequence((fs::path(out) / "gt").string(), metrics::mask_to_tensor(scene.gt));
    save_nlt1((fs::path(out) / "frames.nlt1").string(), scene.frames);
    std::cout << "synth: wrote " << scene.frames.dims[2] << " frames ("
              << scene.frames.dims[0] << "x" << scene.frames.dims[1] << ") under " << out << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& pred, const std::string& gt, const std::string& out,
             double match_radius) {
    const DenseTensor pred_stack = load_sequence(pred);
    const DenseTensor gt_stack = load_sequence(gt);
    if (pred_stack.dims != gt_stack.dims) throw io_error("eval: shape mismatch between pred and gt");
    const metrics::MetricReport rep = metrics::evaluate(
        metrics::mask_from_tensor(pred_stack), metrics::mask_from_tensor(gt_stack), match_radius);
    metrics::write_report_csv(out, rep);
    std::cout << "IoU(1e-2) " << rep.iou * 100.0 << "  F1(1e-2) " << rep.f1 * 100.0 << "  Pd(1e-2) "
              << rep.pd * 100.0 << "  Fa(1e-5) " << rep.fa * 1e5 << "\n";
    return kExitOk;
}

int cmd_flow(const CommonOpts& common, const std::string& input, const std::string& out) {
    const pipeline::PipelineConfig cfg = make_config(common);
    set_num_threads(cfg.threads);
    const DenseTensor frames = load_sequence(input);
    const flow::FlowStack fs_stack =
        flow::compute_flow_stack(frames, cfg.flow_cfg, cfg.fuse_k, cfg.fuse_beta, cfg.flow_normalize);
    fs::create_directories(out);
    save_nlt1((fs::path(out) / "mags.nlt1").string(), fs_stack.mags);
    save_nlt1((fs::path(out) / "fused.nlt1").string(), fs_stack.fused);
    // PGM dump scaled by the stack max
    double mx = 0.0;
    for (double v : fs_stack.fused.data) mx = std::max(mx, v);
    DenseTensor scaled = fs_stack.fused;
    if (mx > 0.0)
        for (double& v : scaled.data) v /= mx;
    save_sequence((fs::path(out) / "fused").string(), scaled);
    std::cout << "flow: wrote magnitude stacks under " << out << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"unsupervised small moving-target detection in infrared sequences"};
    app.require_subcommand(1);

    CommonOpts common;

    auto* detect = app.add_subcommand("detect", "run the full detection pipeline");
    std::string d_input, d_gt, d_out, d_dump;
    detect->add_option("--input", d_input, "input sequence (frame dir or NLT1)")->required();
    detect->add_option("--config", common.config, "flat key=value config file");
    detect->add_option("--set", common.sets, "override one config key (repeatable)");
    detect->add_option("--gt", d_gt, "ground-truth mask sequence");
    detect->add_option("--out", d_out, "output directory");
    detect->add_option("--dump-state", d_dump, "write per-iteration solver snapshots here");
    detect->add_option("--threads", common.threads, "worker threads (0 = hardware default)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
    std::string s_spec, s_out;
    uint64_t s_seed = 0;
    synth->add_option("--spec", s_spec, "scene spec file")->required();
    synth->add_option("--out", s_out, "output directory")->required();
    auto* seed_opt = synth->add_option("--seed", s_seed, "RNG seed (overrides the spec)");

    auto* eval = app.add_subcommand("eval", "score predicted masks against ground truth");
    std::string e_pred, e_gt, e_out = "metrics.csv";
    double e_radius = 3.0;
    eval->add_option("--pred", e_pred, "predicted mask sequence")->required();
    eval->add_option("--gt", e_gt, "ground-truth mask sequence")->required();
    eval->add_option("--out", e_out, "CSV report path");
    eval->add_option("--match-radius", e_radius, "centroid match radius in pixels");

    auto* flow_cmd = app.add_subcommand("flow", "compute fused optical-flow magnitude maps");
    std::string f_input, f_out;
    flow_cmd->add_option("--input", f_input, "input sequence")->required();
    flow_cmd->add_option("--out", f_out, "output directory")->required();
    flow_cmd->add_option("--config", common.config, "flat key=value config file");
    flow_cmd->add_option("--set", common.sets, "override one config key (repeatable)");
    flow_cmd->add_option("--threads", common.threads, "worker threads (0 = hardware default)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (detect->parsed()) return cmd_detect(common, d_input, d_gt, d_out, d_dump);
        if (synth->parsed()) return cmd_synth(s_spec, s_out, s_seed, seed_opt->count() > 0);
        if (eval->parsed()) return cmd_eval(e_pred, e_gt, e_out, e_radius);
        if (flow_cmd->parsed()) return cmd_flow(common, f_input, f_out);
    } catch (const numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const io_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace nlinr
