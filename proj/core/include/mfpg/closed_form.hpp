#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "mfpg/field.hpp"
#include "mfpg/types.hpp"

namespace mfpg {

// Exact equilibrium formulas for type-measurable (deterministic) market
// parameters. Time-varying inputs are evaluated per grid cell.
namespace closed_form {

struct ValueResult {
    double y0 = 0.0; // log-value adjustment at t = 0
    double value = 0.0;
};

// Per-type equilibrium summary on a grid. `value_drift` is the dt-integrand
// of the equilibrium Y process, needed to roll Y forward along paths.
struct EquilibriumReport {
    TimeGrid grid;
    Field z0;                        // (type, 1, cell); the agent's own competition weight scales it
    Field pi_star;                   // (type, 1, cell)
    Field value_drift;               // (type, 1, cell)
    std::vector<double> y0;          // per type
    std::vector<double> value;       // per type
    std::vector<double> index_drift; // per cell: d E[log X*|F0] drift
    std::vector<double> index_load;  // per cell: dW0 loading of log mu*
};

double merton_ratio_cell(const AgentType& type, std::size_t cell);
// Population aggregate entering every type's Z0: the fixed point of the
// index-loading response.
double index_response_cell(const PopulationSpec& pop, std::size_t cell);
std::pair<double, double> mfg_z0_cell(const PopulationSpec& pop, const AgentType& type, std::size_t cell);
double mfg_strategy_cell(const PopulationSpec& pop, const AgentType& type, std::size_t cell);
double log_utility_strategy_cell(const AgentType& type, std::size_t cell);

// t-based forms of the above; t is mapped to its grid cell.
double merton_ratio(const AgentType& type, const TimeGrid& grid, double t);
std::pair<double, double> mfg_z0(const PopulationSpec& pop, const AgentType& type, const TimeGrid& grid,
                                 double t);
double mfg_strategy(const PopulationSpec& pop, const AgentType& type, const TimeGrid& grid, double t);
double log_utility_strategy(const AgentType& type, const TimeGrid& grid, double t);

// Midpoint-rule quadrature of the equilibrium value over the grid.
ValueResult mfg_value(const PopulationSpec& pop, const AgentType& type, const TimeGrid& grid);

// Scaled-strategy construction for comparison; constant coefficients only.
double him_comparison_strategy(const PopulationSpec& pop, const AgentType& type);

// Finite game, deterministic coefficients.
std::vector<double> nplayer_strategies_cell(const std::vector<PlayerSpec>& players, std::size_t cell);
std::vector<double> nplayer_strategies(const std::vector<PlayerSpec>& players, const TimeGrid& grid, double t);

EquilibriumReport equilibrium_report(const PopulationSpec& pop, const TimeGrid& grid);

} // namespace closed_form
} // namespace mfpg
