#pragma once

#include <cstdint>
#include <vector>

#include "mfpg/field.hpp"
#include "mfpg/types.hpp"

namespace mfpg {

// Materialized Brownian increments for one experiment: one common path per
// c, and per (type, common path) a block of idiosyncratic particles. The
// whole set is a pure function of (population shape, grid, counts, seed).
struct ScenarioSet {
    TimeGrid grid;
    std::size_t n_types = 0;
    std::size_t n_common = 0;
    std::size_t n_particles = 0;
    std::uint64_t master_seed = 0;

    // dW0[c*M + m]: common increments; w0_nodes[c*(M+1) + m]: running level.
    std::vector<double> dW0;
    std::vector<double> w0_nodes;
    // dW[((k*C + c)*P + p)*M + m]: idiosyncratic increments.
    std::vector<double> dW;

    double dw0(std::size_t c, std::size_t m) const { return dW0[c * grid.steps + m]; }
    double w0_at(std::size_t c, std::size_t m) const { return w0_nodes[c * grid.n_nodes() + m]; }
    double dw(std::size_t k, std::size_t c, std::size_t p, std::size_t m) const {
        return dW[((k * n_common + c) * n_particles + p) * grid.steps + m];
    }
    std::size_t paths_per_type() const { return n_common * n_particles; }
};

ScenarioSet build_scenarios(const PopulationSpec& pop, const TimeGrid& grid, std::size_t n_common,
                            std::size_t n_particles, std::uint64_t seed);

} // namespace mfpg
