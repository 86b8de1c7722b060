#pragma once

#include <vector>

#include "mfpg/field.hpp"
#include "mfpg/scenario.hpp"
#include "mfpg/types.hpp"

namespace mfpg {

// Investment fraction on the grid: one value per (type, cell), or per
// (type, common path, cell) when adapted to common noise.
struct StrategyField {
    TimeGrid grid;
    Field values; // n_common == 1 for common-noise-independent strategies

    static StrategyField constant(const TimeGrid& grid, std::size_t n_types, double pi) {
        StrategyField s;
        s.grid = grid;
        s.values = Field(n_types, 1, grid.steps, pi);
        return s;
    }
    static StrategyField per_type(const TimeGrid& grid, const std::vector<double>& pi) {
        StrategyField s;
        s.grid = grid;
        s.values = Field(pi.size(), 1, grid.steps);
        for (std::size_t k = 0; k < pi.size(); ++k)
            for (std::size_t m = 0; m < grid.steps; ++m) s.values.at(k, 0, m) = pi[k];
        return s;
    }

    bool per_common() const { return values.n_common > 1; }
    double pi(std::size_t k, std::size_t c, std::size_t m) const {
        return values.at(k, per_common() ? c : 0, m);
    }
    StrategyField shifted(double delta) const {
        StrategyField s = *this;
        for (double& x : s.values.v) x += delta;
        return s;
    }
};

// Log-wealth per (type, common path, particle, node).
struct WealthPanel {
    TimeGrid grid;
    std::size_t n_types = 0, n_common = 0, n_particles = 0;
    std::vector<double> logx; // [((k*C+c)*P+p)*(M+1) + m]

    double at(std::size_t k, std::size_t c, std::size_t p, std::size_t m) const {
        return logx[((k * n_common + c) * n_particles + p) * (grid.steps + 1) + m];
    }
    double& at(std::size_t k, std::size_t c, std::size_t p, std::size_t m) {
        return logx[((k * n_common + c) * n_particles + p) * (grid.steps + 1) + m];
    }
};

// Geometric-mean performance index per (common path, node), stored in logs.
struct IndexPath {
    TimeGrid grid;
    std::size_t n_common = 0;
    std::vector<double> logmu; // [c*(M+1)+m]

    double log_at(std::size_t c, std::size_t m) const { return logmu[c * (grid.steps + 1) + m]; }
    double& log_at(std::size_t c, std::size_t m) { return logmu[c * (grid.steps + 1) + m]; }
};

struct McStat {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

WealthPanel simulate_log_wealth(const ScenarioSet& scen, const PopulationSpec& pop, const StrategyField& strat);

IndexPath performance_index(const WealthPanel& panel, const PopulationSpec& pop);

// Monte Carlo mean of (1/gamma) (X_T mu_T^-theta)^gamma for one type.
McStat realized_utility(const WealthPanel& panel, const IndexPath& index, const PopulationSpec& pop,
                        std::size_t type_index);

// Mean and standard error for samples laid out as [cluster][member], with
// dependence within clusters (shared common noise).
McStat cluster_stats(std::span<const double> values, std::size_t n_clusters, std::size_t cluster_size);

// Long-format export: (type_id, common_id, particle_id, t, log_wealth).
void write_panel_csv(const WealthPanel& panel, const std::string& path);

} // namespace mfpg
