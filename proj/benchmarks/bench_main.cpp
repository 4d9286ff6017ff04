#include <benchmark/benchmark.h>

#include "patternforge/kernels.hpp"
#include "patternforge/lattice_patterns.hpp"
#include "patternforge/periodic_field.hpp"
#include "patternforge/slab_operator.hpp"
#include "patternforge/slab_spectrum.hpp"

#include <random>

using namespace patternforge;

namespace {

void BM_BesselK0Small(benchmark::State& state) {
    double x = 0.7;
    for (auto _ : state) {
        benchmark::DoNotOptimize(bessel_k0(x));
        x = x < 1.9 ? x + 1e-6 : 0.7;
    }
}
BENCHMARK(BM_BesselK0Small);

void BM_BesselK0Large(benchmark::State& state) {
    double x = 3.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(bessel_k0(x));
        x = x < 60.0 ? x + 1e-5 : 3.0;
    }
}
BENCHMARK(BM_BesselK0Large);

void BM_SigmaOracle(benchmark::State& state) {
    SlabParams p{0.5, 0.18};
    for (auto _ : state) benchmark::DoNotOptimize(sigma_oracle(p, 1.0, 1, 0));
}
BENCHMARK(BM_SigmaOracle)->Unit(benchmark::kMillisecond);

void BM_AnalyzeSynthesize(benchmark::State& state) {
    CosSpectrum s(16);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (auto& c : s.c) c = nd(rng);
    for (auto _ : state) {
        SymGrid g = synthesize(s, 64);
        benchmark::DoNotOptimize(analyze(g, 16));
    }
}
BENCHMARK(BM_AnalyzeSynthesize)->Unit(benchmark::kMillisecond);

void BM_TableBuild(benchmark::State& state) {
    for (auto _ : state) {
        QuadratureSpec q;
        NonlocalTables t(0.5, q, 1.2, 3.5);
        benchmark::DoNotOptimize(t.sga(3, 5, 0.2));
    }
}
BENCHMARK(BM_TableBuild)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_JacobianAction(benchmark::State& state) {
    SlabParams p{0.5, 0.18};
    QuadratureSpec q;
    SlabContext ctx(p, q, 1.2, 3.5);
    SlabShape flat{2.229, CosSpectrum(12)};
    CosSpectrum w(12);
    w.at(1, 2) = 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(jacobian_action(ctx, flat, w));
}
BENCHMARK(BM_JacobianAction)->Unit(benchmark::kMillisecond);

void BM_MuK(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(mu_k(2, 0.5, int(state.range(0))));
}
BENCHMARK(BM_MuK)->Arg(2)->Arg(16)->Unit(benchmark::kMicrosecond);

} // namespace

BENCHMARK_MAIN();
