#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "mfpg/field.hpp"
#include "mfpg/market.hpp"
#include "mfpg/scenario.hpp"
#include "mfpg/types.hpp"

namespace mfpg {
namespace bsde {

// Market coefficients evaluated on the solver lattice. Deterministic modes
// collapse the common-path axis to 1.
struct CoeffGrid {
    TimeGrid grid;
    std::size_t n_types = 0, n_common = 0;
    Field h, sigma, sigma0; // (K, C, cells)

    double s2(std::size_t k, std::size_t c, std::size_t m) const {
        double s = sigma.at(k, c, m), s0 = sigma0.at(k, c, m);
        return s * s + s0 * s0;
    }
};

CoeffGrid eval_coeff_grid(const PopulationSpec& pop, const ScenarioSet& scen);
CoeffGrid eval_coeff_grid_deterministic(const PopulationSpec& pop, const TimeGrid& grid);

struct SolverConfig {
    double tol = 1e-10;
    std::size_t max_iter = 50;
    std::size_t basis_degree = 2; // polynomial regression basis in W0
    double damping = 0.0;         // in [0,1]
};

// Solution of the no-competition problem: value process and its
// martingale integrands, the implied investment fraction, and the
// measure-change drift pair.
struct BenchmarkSolution {
    TimeGrid grid;
    CoeffGrid coeffs;
    Field y;                  // (K, C, nodes)
    Field z, z0;              // (K, C, cells); exactly zero in deterministic mode
    Field strategy;           // (K, C, cells)
    Field drift_w, drift_w0;  // (K, C, cells) stochastic-exponential drift
    std::size_t iterations = 0;
    double residual = 0.0;
};

// Pointwise fields entering the transformed driver; all on (K, C, cells)
// except the population aggregate g on (1, C, cells).
struct NotationPack {
    Field phi_s, phi_s0;
    Field g;
    Field f_s, f_s0, f_h;
    Field psi, psi_s, psi_s0;
    Field phi1, phi2, phi3, phi4;
};

struct BsdeSolution {
    TimeGrid grid;
    std::size_t n_types = 0, n_common = 0;
    Field y_aux;           // (K, C, nodes) transformed value process
    Field z_aux, z0_aux;   // (K, C, cells)
    Field z_diff, z0_diff; // difference from the benchmark integrands
    std::size_t iterations = 0;
    double residual = 0.0;        // backward-Euler residual at the final iterate
    double z_norm_over_radius = 0.0;
    bool outside_ball = false;
    std::vector<double> delta_history;
};

struct EquilibriumOutput {
    TimeGrid grid;
    std::size_t n_types = 0, n_common = 0;
    Field pi_star;                 // (K, C, cells)
    Field z, z0;                   // (K, C, cells) equilibrium integrands
    std::vector<double> y0, value; // per type
    IndexPath index;               // simulated performance index under pi_star
};

BenchmarkSolution solve_benchmark(const ScenarioSet& scen, const PopulationSpec& pop, const SolverConfig& cfg);

NotationPack notation_pack(const PopulationSpec& pop, const BenchmarkSolution& benchmark);

// Driver terms that do not involve the competition parameter; includes the
// benchmark-linear terms.
Field driver_base(const NotationPack& pack, const PopulationSpec& pop, const Field& z, const Field& z0);
// Same, without the linear terms (the pure-quadratic measure-changed form).
Field driver_base_quadratic(const NotationPack& pack, const PopulationSpec& pop, const Field& z, const Field& z0);
// Competition-coupled terms; vanishes identically when all thetas are zero.
Field driver_coupling(const NotationPack& pack, const PopulationSpec& pop, const BenchmarkSolution& benchmark,
                      const Field& z, const Field& z0);

double ball_radius(const PopulationSpec& pop);

std::pair<Field, Field> forward_transform(const Field& z_diff, const Field& z0_diff, const NotationPack& pack,
                                          const PopulationSpec& pop);
std::pair<Field, Field> invert_transform(const Field& z_aux, const Field& z0_aux, const NotationPack& pack,
                                         const PopulationSpec& pop);

BsdeSolution picard_solve(const ScenarioSet& scen, const PopulationSpec& pop, const BenchmarkSolution& benchmark,
                          const SolverConfig& cfg);

EquilibriumOutput reconstruct_equilibrium(const BsdeSolution& sol, const BenchmarkSolution& benchmark,
                                          const PopulationSpec& pop, const ScenarioSet& scen);

// Stochastic exponential of the measure-change drift along each particle
// path; returned panel holds log-densities per (type, common, particle, node).
WealthPanel girsanov_density(const PopulationSpec& pop, const BenchmarkSolution& benchmark,
                             const ScenarioSet& scen);

// Least-squares conditional expectation across common paths on a polynomial
// basis of the common-noise level. Exposed for reuse by the expansion module.
struct Regression {
    std::size_t degree = 2;
    // Fits values[c] ~ poly(w0_std[c]) and evaluates the fit at every c.
    // With degree 0 (or at t = 0, where all levels coincide) this is the
    // plain mean.
    std::vector<double> fit(std::span<const double> w0_levels, std::span<const double> values,
                            double t_scale) const;
};

} // namespace bsde
} // namespace mfpg
