#include <benchmark/benchmark.h>

#include <vector>

#include "oudiff/collapse.hpp"
#include "oudiff/moments.hpp"
#include "oudiff/rng.hpp"
#include "oudiff/sampler.hpp"
#include "oudiff/speciation.hpp"

using namespace oudiff;

static void BM_SpeciationTime(benchmark::State& state) {
    const ModelSpec spec = ModelSpec::symmetric(1.0, 0.3, 2.0);
    const MixtureInit init = MixtureInit::modes(1.0, 0.5, 1.0);
    for (auto _ : state) {
        auto result = speciation_time(spec, init);
        benchmark::DoNotOptimize(result);
    }
}

static void BM_SpeciationPureMode(benchmark::State& state) {
    const ModelSpec spec = ModelSpec::symmetric(1.0, 0.5, 2.0);
    const MixtureInit init = MixtureInit::modes(1.0, 0.0, 1.0);
    for (auto _ : state) {
        auto result = speciation_time_pure_mode(spec, init, Mode::plus);
        benchmark::DoNotOptimize(result);
    }
}

static void BM_CollapseJoint(benchmark::State& state) {
    const CollapseParams p = CollapseParams::from_ratio(1.0, 1.0, ModelSpec::symmetric(1.0, 0.5, 2.0));
    for (auto _ : state) {
        auto result = collapse_time_symmetric(p);
        benchmark::DoNotOptimize(result);
    }
}

static void BM_CollapseDet(benchmark::State& state) {
    const CollapseParams p = CollapseParams::from_ratio(1.0, 1.0, ModelSpec::anisotropic(1.0, 0.5, 2.0));
    for (auto _ : state) {
        auto result = collapse_time_det(p);
        benchmark::DoNotOptimize(result);
    }
}

static void BM_DiffusionKernel(benchmark::State& state) {
    const ModelSpec spec = ModelSpec::anisotropic(1.0, 0.7, 2.0);
    const MixtureInit init = MixtureInit::angled(1.0, 1.0, 0.4, 1.0);
    double t = 0.5;
    for (auto _ : state) {
        auto result = diffusion_kernel(spec, init, t);
        benchmark::DoNotOptimize(result);
    }
}

static void BM_PopulationScore(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    const ModelSpec spec = ModelSpec::symmetric(1.0, 0.3, 2.0, d);
    const PopulationScore score(spec, MixtureInit::modes(1.0, 0.5, 0.5, d));
    std::vector<double> z(2 * d, 0.3), out(2 * d);
    for (auto _ : state) {
        score.score(z, 0.7, out);
        benchmark::DoNotOptimize(out.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()));
}

static void BM_EmpiricalScore(benchmark::State& state) {
    const int d = 8;
    const int n = static_cast<int>(state.range(0));
    const ModelSpec spec = ModelSpec::symmetric(1.0, 0.3, 2.0, d);
    Rng rng(1);
    const EmpiricalScore score(spec, draw_dataset(MixtureInit::modes(1.0, 0.5, 0.5, d), n, rng));
    std::vector<double> z(2 * d, 0.3), out(2 * d);
    for (auto _ : state) {
        score.score(z, 0.7, out);
        benchmark::DoNotOptimize(out.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * n);
}

static void BM_ReverseSample(benchmark::State& state) {
    const int d = 8;
    const ModelSpec spec = ModelSpec::symmetric(1.0, 0.3, 2.0, d);
    const PopulationScore score(spec, MixtureInit::modes(1.0, 0.5, 0.5, d));
    SampleOptions opts;
    opts.steps = static_cast<int>(state.range(0));
    Rng rng(2);
    for (auto _ : state) {
        auto result = reverse_sample(spec, score, opts, rng);
        benchmark::DoNotOptimize(result);
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * opts.steps);
}

BENCHMARK(BM_SpeciationTime);
BENCHMARK(BM_SpeciationPureMode);
BENCHMARK(BM_CollapseJoint);
BENCHMARK(BM_CollapseDet);
BENCHMARK(BM_DiffusionKernel);
BENCHMARK(BM_PopulationScore)->Arg(8)->Arg(64)->Arg(512);
BENCHMARK(BM_EmpiricalScore)->Arg(16)->Arg(256);
BENCHMARK(BM_ReverseSample)->Arg(200)->Arg(800);

BENCHMARK_MAIN();
