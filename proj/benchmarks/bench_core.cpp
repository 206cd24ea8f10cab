#include <cmath>

#include <benchmark/benchmark.h>

#include "stabcert/comparison.hpp"
#include "stabcert/pde_solver.hpp"

namespace {

using namespace stabcert;

ProblemSpec constant_problem() {
    ProblemSpec spec;
    spec.model = make_constant(1.0, 1.2, 0.0);
    spec.u0 = [](double x) { return std::sin(x); };
    spec.u1 = [](double) { return 0.0; };
    return spec;
}

Certificate constant_certificate() {
    return make_certificate(make_constant(1.0, 1.2, 0.0), 0.6, 0.5, 0.1, 2.8);
}

void BM_step_imex(benchmark::State& state) {
    const ProblemSpec spec = constant_problem();
    const int N = static_cast<int>(state.range(0));
    EnergyState s = EnergyState::from_closures(N, 0.0, spec.u0, spec.u1);
    for (auto _ : state) {
        s = step_imex(s, spec, 1e-3);
        benchmark::DoNotOptimize(s);
    }
    state.SetItemsProcessed(state.iterations() * N);
}
BENCHMARK(BM_step_imex)->Arg(200)->Arg(800);

void BM_liapunov_V(benchmark::State& state) {
    const ProblemSpec spec = constant_problem();
    const Certificate cert = constant_certificate();
    const EnergyState s =
        EnergyState::from_closures(static_cast<int>(state.range(0)), 0.0, spec.u0, spec.u1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(liapunov_V(s, cert));
    }
}
BENCHMARK(BM_liapunov_V)->Arg(200)->Arg(800);

void BM_envelope(benchmark::State& state) {
    const Certificate cert = constant_certificate();
    ForcingWitnesses witnesses;
    witnesses.g22 = [](double t) { return 0.01 * std::exp(-0.1 * t); };
    const EnvelopeProblem prob = make_envelope(cert, witnesses, 0.1, 0.0, 50.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(integrate_envelope(prob, 1e-3, 50.0));
    }
}
BENCHMARK(BM_envelope);

}  // namespace

BENCHMARK_MAIN();
