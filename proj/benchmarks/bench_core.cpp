#include <benchmark/benchmark.h>

#include "conicflow/flow.hpp"
#include "conicflow/functionals.hpp"
#include "conicflow/geodesic.hpp"

using namespace conicflow;

namespace {

MetricState bench_state(int n) {
    Divisor d({Weight(0.1), Weight(0.2), Weight(0.8)},
              {Vec3{0.9, 0.1, 0.4}, Vec3{-0.5, 0.8, -0.3}, Vec3{-0.3, -0.8, -0.5}});
    FlowConfig cfg;
    cfg.divisor = d;
    cfg.n_lat = n;
    cfg.n_lon = 2 * n;
    cfg.epsilon = 3.2 / n;
    cfg.initial = InitialKind::Bump;
    return make_initial_state(cfg);
}

void BM_Laplacian(benchmark::State& st) {
    auto m = bench_state(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(laplacian(m.u, m));
}

void BM_SemiImplicitStep(benchmark::State& st) {
    auto m = bench_state(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(step(m, 0.01, Stepper::SemiImplicit));
}

void BM_GaugedAdvance(benchmark::State& st) {
    FlowConfig cfg;
    cfg.divisor = bench_state(16).background->divisor;
    cfg.n_lat = static_cast<int>(st.range(0));
    cfg.n_lon = 2 * cfg.n_lat;
    cfg.epsilon = 3.2 / cfg.n_lat;
    cfg.gauge = Gauge::CenterOfMass;
    FlowStepper stepper(cfg, make_initial_state(cfg));
    for (auto _ : st) benchmark::DoNotOptimize(stepper.advance(0.02));
}

void BM_FBeta(benchmark::State& st) {
    auto m = bench_state(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(f_beta(m));
}

void BM_HamiltonEntropy(benchmark::State& st) {
    auto m = bench_state(static_cast<int>(st.range(0)));
    auto R = regular_curvature(m);
    double s = *std::min_element(R.begin(), R.end()) - 0.1;
    for (auto _ : st) benchmark::DoNotOptimize(hamilton_entropy(m, s));
}

void BM_NormalizedW(benchmark::State& st) {
    auto m = bench_state(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(normalized_w_at_potential(m));
}

void BM_DistanceField(benchmark::State& st) {
    auto m = bench_state(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(DistanceField(m, Vec3{0, 0, 1}).nodes());
}

}  // namespace

BENCHMARK(BM_Laplacian)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK(BM_SemiImplicitStep)->Arg(32)->Arg(64);
BENCHMARK(BM_GaugedAdvance)->Arg(32)->Arg(64);
BENCHMARK(BM_FBeta)->Arg(32)->Arg(64);
BENCHMARK(BM_HamiltonEntropy)->Arg(64)->Arg(128);
BENCHMARK(BM_NormalizedW)->Arg(32)->Arg(64);
BENCHMARK(BM_DistanceField)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
