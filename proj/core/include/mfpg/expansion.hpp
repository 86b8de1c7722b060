#pragma once

#include <cstddef>
#include <vector>

#include "mfpg/bsde.hpp"
#include "mfpg/field.hpp"
#include "mfpg/scenario.hpp"
#include "mfpg/types.hpp"

namespace mfpg {
namespace expansion {

// Order-by-order coefficient processes of the competition expansion around
// the no-competition benchmark. Entry i-1 holds order i. `x_mean` is the
// conditional-mean path of the forward correction given the common noise
// (drift-only in deterministic mode, pathwise in Markov mode); `x_load` its
// common-noise loading.
struct ExpansionCoefficients {
    TimeGrid grid;
    std::size_t n_types = 0, n_common = 0, order = 0;
    std::vector<Field> z, z0;   // (K, C, cells) per order
    std::vector<Field> y;       // (K, C, nodes) per order
    std::vector<Field> x_mean;  // (K, C, nodes) per order
    std::vector<Field> x_load;  // (K, C, cells) per order
    Field base_mean;            // (K, C, nodes) benchmark conditional-mean path
    Field base_load;            // (K, C, cells)
};

struct ValueExpansion {
    std::vector<double> logv_ratio0; // per type, at t = 0
    Field pi_correction;             // (K, C, cells)
};

struct OrderCheck {
    double slope = 0.0;
    bool exact_zero = false;
    std::vector<double> thetas;
    std::vector<double> errors;
};

ExpansionCoefficients expand(const ScenarioSet& scen, const PopulationSpec& pop,
                             const bsde::BenchmarkSolution& benchmark, std::size_t order,
                             const bsde::SolverConfig& cfg);

ValueExpansion reconstruct_value_expansion(const ExpansionCoefficients& coeffs,
                                           const bsde::BenchmarkSolution& benchmark,
                                           const PopulationSpec& pop, double theta);

// Rescales every type's competition parameter by a common factor.
PopulationSpec scale_thetas(const PopulationSpec& pop, double factor);

// Log-log remainder slope of the order-n reconstruction against the closed
// form; deterministic coefficients only.
OrderCheck expansion_order_check(const ExpansionCoefficients& coeffs,
                                 const bsde::BenchmarkSolution& benchmark, const PopulationSpec& pop,
                                 const std::vector<double>& theta_list);

} // namespace expansion
} // namespace mfpg
