#include <benchmark/benchmark.h>

#include "polgs/losses.hpp"
#include "polgs/rasterizer.hpp"
#include "polgs/renderer.hpp"
#include "polgs/rng.hpp"
#include "polgs/scene.hpp"
#include "polgs/ssim.hpp"

namespace {

using namespace polgs;

Camera bench_camera(int res) {
    return look_at_camera(Vec3(0, -3, 0.5), Vec3::Zero(), Vec3(0, 0, 1), res,
                          res, 1.2 * res);
}

Scene bench_scene(int n_surfels, uint64_t seed) {
    Scene scene(16);
    Rand64 rng(seed);
    for (int i = 0; i < n_surfels; ++i) {
        GaussianSurfel s;
        s.position = Vec3(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8),
                          rng.uniform(-0.8, 0.8));
        s.log_scale = Vec2(rng.uniform(-3.2, -2.2), rng.uniform(-3.2, -2.2));
        Vec4 q(rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian());
        s.rotation = q.norm() > 1e-9 ? Vec4(q / q.norm()) : Vec4(1, 0, 0, 0);
        s.opacity_logit = rng.uniform(-1.0, 2.0);
        s.color = Rgb(rng.uniform(), rng.uniform(), rng.uniform());
        scene.cloud.push_back(s);
    }
    return scene;
}

void BM_CompositeSerial(benchmark::State& state) {
    const int res = int(state.range(0));
    const Scene scene = bench_scene(int(state.range(1)), 7);
    const Camera cam = bench_camera(res);
    const auto projected = project_all(scene.cloud, cam);
    for (auto _ : state) {
        RenderBuffers buf = composite_serial(projected, res, res, false);
        benchmark::DoNotOptimize(buf.color.data());
    }
    state.SetItemsProcessed(state.iterations() * res * res);
}

void BM_CompositeTiled(benchmark::State& state) {
    const int res = int(state.range(0));
    const Scene scene = bench_scene(int(state.range(1)), 7);
    const Camera cam = bench_camera(res);
    const auto projected = project_all(scene.cloud, cam);
    for (auto _ : state) {
        RenderBuffers buf = composite_tiled(projected, res, res, false);
        benchmark::DoNotOptimize(buf.color.data());
    }
    state.SetItemsProcessed(state.iterations() * res * res);
}

void BM_CompositeBackward(benchmark::State& state) {
    const int res = int(state.range(0));
    const Scene scene = bench_scene(int(state.range(1)), 7);
    const Camera cam = bench_camera(res);
    const auto projected = project_all(scene.cloud, cam);
    const RenderBuffers buf = composite_tiled(projected, res, res, true);
    const Image g3(res, res, 3, 1.0), g1(res, res, 1, 1.0);
    for (auto _ : state) {
        CompositeGrads cg = composite_backward(projected, buf, g3, g1, g3, g1);
        benchmark::DoNotOptimize(cg.color.data());
    }
}

void BM_RenderForward(benchmark::State& state) {
    const int res = int(state.range(0));
    const Scene scene = bench_scene(int(state.range(1)), 7);
    const Camera cam = bench_camera(res);
    for (auto _ : state) {
        RenderOutputs out =
            render_view(scene, cam, RenderMode::Full, 1.5, false);
        benchmark::DoNotOptimize(out.stokes.s0.data());
    }
}

void BM_Ssim(benchmark::State& state) {
    const int res = int(state.range(0));
    Rand64 rng(11);
    Image a(res, res, 3), b(res, res, 3);
    for (size_t i = 0; i < a.size(); ++i) {
        a.data()[i] = rng.uniform();
        b.data()[i] = rng.uniform();
    }
    for (auto _ : state) {
        SsimData d = ssim_compute(a, b);
        benchmark::DoNotOptimize(d.mean);
    }
}

} // namespace

BENCHMARK(BM_CompositeSerial)->Args({256, 500})->Args({256, 2000});
BENCHMARK(BM_CompositeTiled)->Args({256, 500})->Args({256, 2000});
BENCHMARK(BM_CompositeBackward)->Args({256, 500});
BENCHMARK(BM_RenderForward)->Args({128, 500});
BENCHMARK(BM_Ssim)->Arg(256);

BENCHMARK_MAIN();
