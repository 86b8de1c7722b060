#pragma once

#include <cstdint>
#include <vector>

#include "mfpg/bsde.hpp"
#include "mfpg/closed_form.hpp"
#include "mfpg/market.hpp"
#include "mfpg/scenario.hpp"

namespace mfpg {
namespace verification {

// Equilibrium value-process data needed to roll R^pi along paths.
// n_common == 1 in `drift`/`z0` broadcasts across scenario paths.
struct YPathSpec {
    std::vector<double> y0; // per type
    Field drift;            // (K, Cy, cells) dt-integrand of -dY
    Field z0;               // (K, Cy, cells) common-noise integrand
};

YPathSpec ypath_from_closed_form(const closed_form::EquilibriumReport& rep);
YPathSpec ypath_from_solver(const bsde::EquilibriumOutput& eq, const bsde::BenchmarkSolution& benchmark,
                            const PopulationSpec& pop);

// Exact equilibrium index along the scenario's common paths (closed form).
IndexPath equilibrium_log_index(const PopulationSpec& pop, const closed_form::EquilibriumReport& rep,
                                const ScenarioSet& scen);

// Same construction from a solver equilibrium: the conditional mean of
// log-wealth propagates per common path through type-weighted drift and
// loading, with no particle noise.
IndexPath equilibrium_log_index(const PopulationSpec& pop, const bsde::EquilibriumOutput& eq,
                                const bsde::BenchmarkSolution& benchmark, const ScenarioSet& scen);

struct FixedPointResult {
    double sup_abs = 0.0; // sup over (path, t) of |log mu_candidate - log mu_hat|
    // sup over t of the common-path-averaged residual, in units of the
    // aggregated particle-estimator SE
    double sup_z = 0.0;
    // the same statistic at the horizon, where the signal is largest; this
    // is the consistency gate (a single draw, so plain normal quantiles
    // apply)
    double terminal_z = 0.0;
};

FixedPointResult fixed_point_residual(const PopulationSpec& pop, const StrategyField& strat,
                                      const IndexPath& candidate, const ScenarioSet& scen);

struct MartingaleResult {
    std::vector<std::size_t> checkpoint_nodes;
    // increments[k][i]: stats of R_{t_{i+1}} - R_{t_i} for type k
    std::vector<std::vector<McStat>> increments;
    std::vector<McStat> total; // R_T - R_0 per type
    double max_abs_z = 0.0;
    // largest increment mean measured in SEs (positive = drift up); for a
    // supermartingale this should not exceed noise.
    double max_upward_z = -1e300;
    double max_total_z = -1e300; // full-horizon drift statistic
};

MartingaleResult martingale_test(const PopulationSpec& pop, const StrategyField& strat, const YPathSpec& ypath,
                                 const ScenarioSet& scen, std::size_t n_checkpoints = 4);

struct BestResponseGap {
    double delta = 0.0;
    std::size_t type_index = 0;
    McStat gap; // utility(pi + delta) - utility(pi), common random numbers
};

std::vector<BestResponseGap> best_response_test(const PopulationSpec& pop, const StrategyField& strat,
                                                const std::vector<double>& deltas, const IndexPath& frozen_index,
                                                const ScenarioSet& scen);

struct ConvergenceRow {
    std::size_t n_players = 0;
    double mean_error = 0.0;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    double slope = 0.0; // log-log fit of error against N
};

ConvergenceTable nplayer_convergence(const PopulationSpec& base_pop, const std::vector<std::size_t>& n_list,
                                     std::size_t n_seeds, std::uint64_t seed);

} // namespace verification
} // namespace mfpg
