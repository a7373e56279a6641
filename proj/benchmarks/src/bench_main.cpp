#include <benchmark/benchmark.h>

#include "di3po/canny.hpp"
#include "di3po/denoiser.hpp"
#include "di3po/dpo.hpp"
#include "di3po/metrics.hpp"
#include "di3po/rng.hpp"

namespace {

using namespace di3po;

void BM_LossGrad(benchmark::State& state) {
    DenoiserShape shape;
    shape.width = static_cast<int>(state.range(0));
    shape.height = static_cast<int>(state.range(0));
    Denoiser model = Denoiser::random_init(shape, 1);
    NoiseSchedule sched = make_schedule(ScheduleKind::Linear, shape.num_timesteps, 1e-4, 0.02);
    Grid x0 = gaussian_grid(shape.width, shape.height, 2);
    Grid eps = gaussian_grid(shape.width, shape.height, 3);
    for (auto _ : state) {
        auto [loss, grad] = model.loss_grad(x0, 40, eps, Condition{1, false}, sched);
        benchmark::DoNotOptimize(loss);
        benchmark::DoNotOptimize(grad);
    }
}
BENCHMARK(BM_LossGrad)->Arg(16)->Arg(32)->Arg(64);

void BM_DpoGrad(benchmark::State& state) {
    DenoiserShape shape;
    shape.width = 16;
    shape.height = 16;
    Denoiser model = Denoiser::random_init(shape, 1);
    Denoiser ref = Denoiser::random_init(shape, 2);
    NoiseSchedule sched = make_schedule(ScheduleKind::Linear, shape.num_timesteps, 1e-4, 0.02);
    PreferencePair pair{gaussian_grid(16, 16, 3), gaussian_grid(16, 16, 4),
                        RegionMask::from_box(16, 16, 6, 6, 4, 4), Condition{0, false}};
    Grid eps = gaussian_grid(16, 16, 5);
    for (auto _ : state) {
        DpoGradResult r = dpo_grad(model, ref, {}, pair, 40, eps, sched);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_DpoGrad);

void BM_Canny(benchmark::State& state) {
    int n = static_cast<int>(state.range(0));
    Raster img(n, n, 1);
    std::mt19937_64 eng(7);
    for (auto& p : img.pixels) p = static_cast<uint8_t>(eng() % 256);
    for (auto _ : state) {
        Raster edges = canny_edges(img, CannyDefaults{}.low, CannyDefaults{}.high, CannyDefaults{}.sigma);
        benchmark::DoNotOptimize(edges);
    }
}
BENCHMARK(BM_Canny)->Arg(64)->Arg(128);

void BM_Levenshtein(benchmark::State& state) {
    std::string a(static_cast<size_t>(state.range(0)), 'a'), b = a;
    for (size_t i = 0; i < b.size(); i += 3) b[i] = 'b';
    for (auto _ : state) benchmark::DoNotOptimize(levenshtein(a, b));
}
BENCHMARK(BM_Levenshtein)->Arg(16)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
