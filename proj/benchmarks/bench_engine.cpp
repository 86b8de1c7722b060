#include <benchmark/benchmark.h>

#include <cmath>

#include "mfpg/bsde.hpp"
#include "mfpg/closed_form.hpp"
#include "mfpg/expansion.hpp"
#include "mfpg/market.hpp"
#include "mfpg/scenario.hpp"

using namespace mfpg;

namespace {

AgentType bench_type(double theta = 1.0) {
    AgentType ty;
    ty.x = 1.0;
    ty.gamma = 0.5;
    ty.theta = theta;
    ty.coeffs = CoefficientModel::constant(0.1, 0.2, 0.2);
    return ty;
}

AgentType markov_type(double theta) {
    AgentType ty;
    ty.x = 1.0;
    ty.gamma = 0.5;
    ty.theta = theta;
    CoefficientModel::MarkovFn h, s, s0;
    h.eval = [](double, double w0) { return 0.1 + 0.05 * std::tanh(w0); };
    h.lo = 0.05;
    h.hi = 0.15;
    s.eval = [](double, double) { return 0.2; };
    s.lo = s.hi = 0.2;
    s0.eval = [](double, double) { return 0.2; };
    s0.lo = s0.hi = 0.2;
    ty.coeffs = CoefficientModel::markov(h, s, s0);
    return ty;
}

void BM_build_scenarios(benchmark::State& state) {
    auto pop = PopulationSpec::single(bench_type());
    TimeGrid grid(1.0, 64);
    for (auto _ : state) {
        auto s = build_scenarios(pop, grid, static_cast<std::size_t>(state.range(0)), 64, 7);
        benchmark::DoNotOptimize(s.dW.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 64 * 64);
}
BENCHMARK(BM_build_scenarios)->Arg(16)->Arg(128);

void BM_simulate_panel(benchmark::State& state) {
    auto pop = PopulationSpec::single(bench_type());
    TimeGrid grid(1.0, 64);
    auto scen = build_scenarios(pop, grid, static_cast<std::size_t>(state.range(0)), 64, 7);
    auto strat = StrategyField::constant(grid, 1, 1.5);
    for (auto _ : state) {
        auto panel = simulate_log_wealth(scen, pop, strat);
        benchmark::DoNotOptimize(panel.logx.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 64 * 64);
}
BENCHMARK(BM_simulate_panel)->Arg(16)->Arg(128);

void BM_closed_form_report(benchmark::State& state) {
    PopulationSpec pop;
    pop.entries.push_back({0.5, bench_type()});
    auto t2 = bench_type(0.5);
    t2.gamma = -1.0;
    t2.coeffs = CoefficientModel::constant(0.05, 0.3, 0.1);
    pop.entries.push_back({0.5, t2});
    pop.validate();
    TimeGrid grid(1.0, 256);
    for (auto _ : state) {
        auto rep = closed_form::equilibrium_report(pop, grid);
        benchmark::DoNotOptimize(rep.y0.data());
    }
}
BENCHMARK(BM_closed_form_report);

void BM_picard_deterministic(benchmark::State& state) {
    auto pop = PopulationSpec::single(bench_type());
    auto scen = build_scenarios(pop, TimeGrid(1.0, static_cast<std::size_t>(state.range(0))), 1, 1, 7);
    bsde::SolverConfig cfg;
    auto bench = bsde::solve_benchmark(scen, pop, cfg);
    for (auto _ : state) {
        auto sol = bsde::picard_solve(scen, pop, bench, cfg);
        benchmark::DoNotOptimize(sol.residual);
    }
}
BENCHMARK(BM_picard_deterministic)->Arg(64)->Arg(256);

void BM_picard_markov(benchmark::State& state) {
    auto pop = PopulationSpec::single(markov_type(0.5));
    auto scen = build_scenarios(pop, TimeGrid(1.0, 16), static_cast<std::size_t>(state.range(0)), 1, 7);
    bsde::SolverConfig cfg;
    auto bench = bsde::solve_benchmark(scen, pop, cfg);
    for (auto _ : state) {
        auto sol = bsde::picard_solve(scen, pop, bench, cfg);
        benchmark::DoNotOptimize(sol.residual);
    }
}
BENCHMARK(BM_picard_markov)->Arg(512)->Arg(2048);

void BM_expand_order3(benchmark::State& state) {
    auto pop = PopulationSpec::single(bench_type());
    auto scen = build_scenarios(pop, TimeGrid(1.0, 128), 1, 1, 7);
    bsde::SolverConfig cfg;
    auto bench = bsde::solve_benchmark(scen, pop, cfg);
    for (auto _ : state) {
        auto co = expansion::expand(scen, pop, bench, 3, cfg);
        benchmark::DoNotOptimize(co.z0.back().v.data());
    }
}
BENCHMARK(BM_expand_order3);

} // namespace

BENCHMARK_MAIN();
