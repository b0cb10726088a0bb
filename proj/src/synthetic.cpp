#include "nlinr/synthetic.hpp"

#include <cmath>

#include "nlinr/inr.hpp"
#include "nlinr/rng.hpp"

namespace nlinr::synthetic {

void SceneSpec::validate() const {
    if (n1 < 1 || n2 < 1 || n3 < 1) throw std::invalid_argument("scene: empty dimensions");
    if (!(bg_low >= 0.0 && bg_high <= 1.0 && bg_low < bg_high))
        throw std::invalid_argument("scene: background band must satisfy 0 <= low < high <= 1");
    if (noise_sigma < 0.0) throw std::invalid_argument("scene: noise sigma must be >= 0");
    for (const TargetSpec& t : targets) {
        if (!(t.amplitude > 0.0 && t.amplitude <= 1.0))
            throw std::invalid_argument("scene: target amplitude must be in (0,1]");
        if (!(t.radius > 0.0)) throw std::invalid_argument("scene: target radius must be > 0");
    }
}

namespace {

// smooth low-frequency factor matrix for one mode
Matrix smooth_factor(int64_t n, int64_t rank, Rng& rng) {
    Matrix u(n, rank);
    for (int64_t j = 0; j < rank; ++j) {
        const double freq = rng.uniform(0.5, 1.0 + static_cast<double>(j));
        const double phase = rng.uniform(0.0, 6.283185307179586477);
        for (int64_t i = 0; i < n; ++i) {
            const double x = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
            u(i, j) = std::cos(3.141592653589793 * freq * x + phase);
        }
    }
    return u;
}

}  // namespace

Scene generate_scene(const SceneSpec& spec, uint64_t seed) {
    spec.validate();
    const int64_t n1 = spec.n1, n2 = spec.n2, n3 = spec.n3;

    // background: Tucker draw with smooth factors, mapped into [bg_low, bg_high]
    Rng rng(mix_seed(seed, 1));
    const std::array<int64_t, 3> r{std::min(spec.bg_ranks[0], n1), std::min(spec.bg_ranks[1], n2),
                                   std::min(spec.bg_ranks[2], n3)};
    DenseTensor core({r[0], r[1], r[2]});
    for (double& v : core.data) v = rng.uniform(-1.0, 1.0);
    std::vector<Matrix> u{smooth_factor(n1, r[0], rng), smooth_factor(n2, r[1], rng),
                          smooth_factor(n3, r[2], rng)};
    DenseTensor bg = inr::tucker_assemble(core, u);
    double lo = bg[0], hi = bg[0];
    for (double v : bg.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (double& v : bg.data) v = spec.bg_low + (spec.bg_high - spec.bg_low) * (v - lo) / span;

    // targets: Gaussian blobs on linear trajectories; GT where a single
    // target's clean contribution exceeds half its amplitude
    Scene scene;
    scene.gt.assign(static_cast<size_t>(n3), metrics::BinaryMask(n1, n2));
    DenseTensor clean = bg;
    for (const TargetSpec& t : spec.targets) {
        const double sigma = t.radius / 2.0;
        for (int64_t f = 0; f < n3; ++f) {
            const double cy = t.row0 + t.vrow * static_cast<double>(f);
            const double cx = t.col0 + t.vcol * static_cast<double>(f);
            if (cy < 0.0 || cy > static_cast<double>(n1 - 1) || cx < 0.0 ||
                cx > static_cast<double>(n2 - 1))
                throw std::invalid_argument("scene: target trajectory exits the frame");
            const int64_t ilo = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cy - 4 * sigma)));
            const int64_t ihi = std::min<int64_t>(n1 - 1, static_cast<int64_t>(std::ceil(cy + 4 * sigma)));
            const int64_t jlo = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cx - 4 * sigma)));
            const int64_t jhi = std::min<int64_t>(n2 - 1, static_cast<int64_t>(std::ceil(cx + 4 * sigma)));
            for (int64_t i = ilo; i <= ihi; ++i)
                for (int64_t j = jlo; j <= jhi; ++j) {
                    const double d2 = (i - cy) * (i - cy) + (j - cx) * (j - cx);
                    const double contrib = t.amplitude * std::exp(-d2 / (2.0 * sigma * sigma));
                    clean.data[static_cast<size_t>((i * n2 + j) * n3 + f)] += contrib;
                    if (contrib > 0.5 * t.amplitude) scene.gt[static_cast<size_t>(f)].set(i, j, true);
                }
        }
    }

    // noise, then clamp to [0,1]
    Rng noise_rng(mix_seed(seed, 2));
    scene.frames = std::move(clean);
    for (double& v : scene.frames.data) {
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise_rng.normal();
        v = std::min(1.0, std::max(0.0, v));
    }
    return scene;
}

SceneSpec default_scene() {
    SceneSpec spec;
    TargetSpec t;
    t.row0 = 32.0;
    t.col0 = 10.0;
    t.vrow = 0.0;
    t.vcol = 1.0;  // 1 px/frame
    t.amplitude = 0.6;
    t.radius = 2.0;
    spec.targets.push_back(t);
    return spec;
}

SceneSpec three_target_scene() {
    SceneSpec spec;
    TargetSpec a;
    a.row0 = 12.0; a.col0 = 8.0;  a.vrow = 0.0;  a.vcol = 2.0;
    TargetSpec b;
    b.row0 = 30.0; b.col0 = 52.0; b.vrow = 1.0;  b.vcol = -2.0;
    TargetSpec c;
    c.row0 = 50.0; c.col0 = 12.0; c.vrow = -1.0; c.vcol = 2.0;
    for (TargetSpec* t : {&a, &b, &c}) {
        t->amplitude = 0.6;
        t->radius = 2.0;
    }
    spec.targets = {a, b, c};
    return spec;
}

}  // namespace nlinr::synthetic
