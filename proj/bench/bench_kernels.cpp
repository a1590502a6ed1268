// Serial reference vs OpenMP kernel for the data-parallel stages.
// With one core the two should be within noise of each other.

#include <benchmark/benchmark.h>

#include "empc/mpqp.hpp"
#include "empc/verify.hpp"

using namespace empc;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

void label_name(benchmark::State& state) { state.SetLabel(state.range(0) ? "parallel" : "serial"); }

void BM_GenerateDataset(benchmark::State& state) {
    const Scenario s = builtin_scenario("oscillating_masses");
    const CondensedMpc m = condense(s);
    for (auto _ : state) benchmark::DoNotOptimize(generate_dataset(m, 500, 1, s.sample_box, exec_of(state)));
    label_name(state);
}

void BM_EnumerateExplicit(benchmark::State& state) {
    Scenario s = builtin_scenario("oscillating_masses");
    s.N = 2;
    const CondensedMpc m = condense(s);
    ExplicitOptions opt;
    opt.exec = exec_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(enumerate_explicit(m, opt));
    label_name(state);
}

void BM_LabelInitialStates(benchmark::State& state) {
    Scenario s = builtin_scenario("oscillator");
    s.P = solve_dare(s.system.A, s.system.B, s.Q, s.R);
    const CondensedMpc m = condense(s);
    const Controller oracle = [&m](const Vector& x) { return mpc_control(m, x); };
    const auto x0s = draw_initial_states(s.sample_box, 2000, 1, 7);
    for (auto _ : state) benchmark::DoNotOptimize(label_initial_states(s, oracle, x0s, "implicit", 1, exec_of(state)));
    label_name(state);
}

}  // namespace

BENCHMARK(BM_GenerateDataset)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnumerateExplicit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LabelInitialStates)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
