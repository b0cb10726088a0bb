// Times the OpenMP kernels against the plain serial reference implementations.
//
//   bench_kernels [groups] [patch] [frames] [slots] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "nlinr/admm.hpp"
#include "nlinr/inr.hpp"
#include "nlinr/parallel.hpp"
#include "nlinr/reference.hpp"
#include "nlinr/rng.hpp"

using namespace nlinr;
using Clock = std::chrono::steady_clock;

namespace {

template <class F>
double time_ms(int repeats, F&& fn) {
    fn();  // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < repeats; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-22s serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
    const int64_t L = argc > 1 ? std::atoll(argv[1]) : 16;
    const int64_t p = argc > 2 ? std::atoll(argv[2]) : 16;
    const int64_t n3 = argc > 3 ? std::atoll(argv[3]) : 12;
    const int64_t slots = argc > 4 ? std::atoll(argv[4]) : 4;
    const int repeats = argc > 5 ? std::atoi(argv[5]) : 5;

    std::printf("group tensor %lld x %lld x %lld x %lld x %lld, %d threads\n",
                static_cast<long long>(L), static_cast<long long>(p), static_cast<long long>(p),
                static_cast<long long>(n3), static_cast<long long>(slots), max_threads());

    inr::InrConfig icfg;
    icfg.ranks = {4, 4, 4, 2};
    icfg.width = 32;
    icfg.depth = 3;
    const std::array<int64_t, 4> extents{p, p, n3, slots};
    const inr::InrParameters theta = inr::init_parameters(L, extents, icfg, 7);

    DenseTensor target({L, p, p, n3, slots});
    Rng rng(123);
    for (double& v : target.data) v = rng.uniform(0.0, 1.0);

    report("assemble_background",
           time_ms(repeats, [&] { (void)reference::assemble_background(theta); }),
           time_ms(repeats, [&] { (void)inr::assemble_background(theta); }));

    inr::InrGradients grads;
    report("loss_and_grad",
           time_ms(repeats, [&] { (void)reference::loss_and_grad(theta, target, 1.0, 0.1, 0.7, &grads); }),
           time_ms(repeats, [&] { (void)inr::loss_and_grad(theta, target, 1.0, 0.1, 0.7, &grads); }));

    const DenseTensor b = inr::assemble_background(theta);
    const DenseTensor tp(target.dims, 0.1);
    const DenseTensor lam(target.dims, 0.01);
    report("update_a", time_ms(repeats, [&] { (void)reference::update_a(target, tp, b, lam, 0.5); }),
           time_ms(repeats, [&] { (void)admm::update_a(target, tp, b, lam, 0.5); }));

    report("soft_threshold", time_ms(repeats, [&] { (void)reference::soft_threshold(target, 0.125); }),
           time_ms(repeats, [&] { (void)admm::soft_threshold(target, 0.125); }));

    std::vector<DenseTensor> patches;
    for (int64_t l = 0; l < std::max<int64_t>(L, 24); ++l) {
        DenseTensor t({p, p, n3});
        for (double& v : t.data) v = rng.uniform(0.0, 1.0);
        patches.push_back(std::move(t));
    }
    const int64_t s = std::min<int64_t>(5, static_cast<int64_t>(patches.size()) - 1);
    report("nonlocal_index", time_ms(repeats, [&] { (void)reference::build_index(patches, s); }),
           time_ms(repeats, [&] { (void)grouping::build_index(patches, s); }));

    return 0;
}
