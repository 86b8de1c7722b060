#include "mfpg/market.hpp"

#include <cmath>

#include "mfpg/csv.hpp"
#include "mfpg/parallel.hpp"

namespace mfpg {

WealthPanel simulate_log_wealth(const ScenarioSet& scen, const PopulationSpec& pop, const StrategyField& strat) {
    require(strat.grid == scen.grid, ErrorKind::InvalidArgument, "simulate_log_wealth: grid mismatch");
    require(strat.values.n_types == pop.n_types() && pop.n_types() == scen.n_types,
            ErrorKind::InvalidArgument, "simulate_log_wealth: population/strategy shape mismatch");
    require(!strat.per_common() || strat.values.n_common == scen.n_common, ErrorKind::InvalidArgument,
            "simulate_log_wealth: strategy common-path count mismatch");

    const std::size_t M = scen.grid.steps;
    const double dt = scen.grid.dt();

    WealthPanel panel;
    panel.grid = scen.grid;
    panel.n_types = scen.n_types;
    panel.n_common = scen.n_common;
    panel.n_particles = scen.n_particles;
    panel.logx.resize(scen.n_types * scen.n_common * scen.n_particles * (M + 1));

    parallel_for(scen.n_types * scen.n_common, [&](std::size_t kc) {
        const std::size_t k = kc / scen.n_common, c = kc % scen.n_common;
        const AgentType& ty = pop.type(k);
        for (std::size_t p = 0; p < scen.n_particles; ++p) {
            double x = std::log(ty.x);
            panel.at(k, c, p, 0) = x;
            for (std::size_t m = 0; m < M; ++m) {
                const double t = scen.grid.node(m);
                const double w0 = scen.w0_at(c, m);
                const double h = ty.coeffs.h_at(m, t, w0);
                const double sg = ty.coeffs.sigma_at(m, t, w0);
                const double sg0 = ty.coeffs.sigma0_at(m, t, w0);
                const double pi = strat.pi(k, c, m);
                x += pi * (h - 0.5 * pi * (sg * sg + sg0 * sg0)) * dt + pi * sg * scen.dw(k, c, p, m) +
                     pi * sg0 * scen.dw0(c, m);
                panel.at(k, c, p, m + 1) = x;
            }
        }
    });
    return panel;
}

IndexPath performance_index(const WealthPanel& panel, const PopulationSpec& pop) {
    require(panel.n_types == pop.n_types(), ErrorKind::InvalidArgument, "performance_index: shape mismatch");
    IndexPath idx;
    idx.grid = panel.grid;
    idx.n_common = panel.n_common;
    idx.logmu.resize(panel.n_common * (panel.grid.steps + 1));

    const std::size_t nodes = panel.grid.steps + 1;
    parallel_for(panel.n_common, [&](std::size_t c) {
        std::vector<double> buf(panel.n_particles);
        for (std::size_t m = 0; m < nodes; ++m) {
            double acc = 0.0;
            for (std::size_t k = 0; k < panel.n_types; ++k) {
                for (std::size_t p = 0; p < panel.n_particles; ++p) buf[p] = panel.at(k, c, p, m);
                acc += pop.weight(k) * pairwise_sum(buf) / static_cast<double>(panel.n_particles);
            }
            idx.log_at(c, m) = acc;
        }
    });
    return idx;
}

McStat realized_utility(const WealthPanel& panel, const IndexPath& index, const PopulationSpec& pop,
                        std::size_t type_index) {
    require(type_index < pop.n_types(), ErrorKind::InvalidArgument, "realized_utility: bad type index");
    require(index.n_common == panel.n_common, ErrorKind::InvalidArgument, "realized_utility: shape mismatch");
    const AgentType& ty = pop.type(type_index);
    const std::size_t M = panel.grid.steps;

    std::vector<double> u(panel.n_common * panel.n_particles);
    parallel_for(panel.n_common, [&](std::size_t c) {
        const double logmuT = index.log_at(c, M);
        for (std::size_t p = 0; p < panel.n_particles; ++p) {
            const double xT = panel.at(type_index, c, p, M);
            u[c * panel.n_particles + p] = std::exp(ty.gamma * (xT - ty.theta * logmuT)) / ty.gamma;
        }
    });
    for (double v : u)
        require(std::isfinite(v), ErrorKind::NumericalOverflow, "realized_utility: non-finite terminal utility");
    return cluster_stats(u, panel.n_common, panel.n_particles);
}

// Paths sharing a common-noise realization are dependent; the standard
// error comes from the spread of per-common-path means.
McStat cluster_stats(std::span<const double> values, std::size_t n_clusters, std::size_t cluster_size) {
    McStat st;
    st.n = values.size();
    st.mean = pairwise_sum(values) / static_cast<double>(st.n);
    if (n_clusters >= 2) {
        double ss = 0.0;
        for (std::size_t c = 0; c < n_clusters; ++c) {
            double m = pairwise_sum(values.subspan(c * cluster_size, cluster_size)) /
                       static_cast<double>(cluster_size);
            ss += (m - st.mean) * (m - st.mean);
        }
        st.se = std::sqrt(ss / (static_cast<double>(n_clusters) * (static_cast<double>(n_clusters) - 1.0)));
    } else if (st.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - st.mean) * (v - st.mean);
        st.se = std::sqrt(ss / (static_cast<double>(st.n) * (static_cast<double>(st.n) - 1.0)));
    }
    return st;
}


void write_panel_csv(const WealthPanel& panel, const std::string& path) {
    CsvWriter w(path);
    w.header({"type_id", "common_id", "particle_id", "t", "log_wealth"});
    for (std::size_t k = 0; k < panel.n_types; ++k)
        for (std::size_t c = 0; c < panel.n_common; ++c)
            for (std::size_t p = 0; p < panel.n_particles; ++p)
                for (std::size_t m = 0; m <= panel.grid.steps; ++m) {
                    w.cell(k).cell(c).cell(p).fixed(panel.grid.node(m)).fixed(panel.at(k, c, p, m));
                    w.endrow();
                }
}

} // namespace mfpg

