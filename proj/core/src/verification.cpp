#include "mfpg/verification.hpp"

#include <algorithm>
#include <cmath>

#include "mfpg/parallel.hpp"
#include "mfpg/rng.hpp"

namespace mfpg {
namespace verification {

namespace {

// Y along one (type, common) pair, on all nodes.
void roll_y(const YPathSpec& yp, const ScenarioSet& scen, std::size_t k, std::size_t c,
            std::vector<double>& out) {
    const std::size_t M = scen.grid.steps;
    const double dt = scen.grid.dt();
    const std::size_t cy = yp.drift.n_common == 1 ? 0 : c;
    out.resize(M + 1);
    double y = yp.y0[k];
    out[0] = y;
    for (std::size_t m = 0; m < M; ++m) {
        y += -yp.drift.at(k, cy, m) * dt + yp.z0.at(k, cy, m) * scen.dw0(c, m);
        out[m + 1] = y;
    }
}

} // namespace

YPathSpec ypath_from_closed_form(const closed_form::EquilibriumReport& rep) {
    YPathSpec yp;
    yp.y0 = rep.y0;
    yp.drift = rep.value_drift;
    yp.z0 = rep.z0;
    return yp;
}

YPathSpec ypath_from_solver(const bsde::EquilibriumOutput& eq, const bsde::BenchmarkSolution& benchmark,
                            const PopulationSpec& pop) {
    const auto& cg = benchmark.coeffs;
    const std::size_t K = eq.n_types, C = eq.n_common, M = eq.grid.steps;
    YPathSpec yp;
    yp.y0 = eq.y0;
    yp.z0 = eq.z0;
    yp.drift = Field(K, C, M);
    for (std::size_t k = 0; k < K; ++k) {
        const AgentType& ty = pop.type(k);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t m = 0; m < M; ++m) {
                double z = eq.z.at(k, c, m), z0 = eq.z0.at(k, c, m);
                double numer = cg.h.at(k, c, m) + cg.sigma.at(k, c, m) * z + cg.sigma0.at(k, c, m) * z0;
                yp.drift.at(k, c, m) = 0.5 * (z * z + z0 * z0) +
                                       ty.gamma * numer * numer /
                                           (2.0 * (1.0 - ty.gamma) * cg.s2(k, c, m));
            }
    }
    return yp;
}

IndexPath equilibrium_log_index(const PopulationSpec& pop, const closed_form::EquilibriumReport& rep,
                                const ScenarioSet& scen) {
    IndexPath idx;
    idx.grid = scen.grid;
    idx.n_common = scen.n_common;
    idx.logmu.resize(scen.n_common * (scen.grid.steps + 1));
    double log0 = pop.mean_over_types([](std::size_t, const AgentType& ty) { return std::log(ty.x); });
    for (std::size_t c = 0; c < scen.n_common; ++c) {
        double v = log0;
        idx.log_at(c, 0) = v;
        for (std::size_t m = 0; m < scen.grid.steps; ++m) {
            v += rep.index_drift[m] * scen.grid.dt() + rep.index_load[m] * scen.dw0(c, m);
            idx.log_at(c, m + 1) = v;
        }
    }
    return idx;
}

IndexPath equilibrium_log_index(const PopulationSpec& pop, const bsde::EquilibriumOutput& eq,
                                const bsde::BenchmarkSolution& benchmark, const ScenarioSet& scen) {
    require(eq.n_common == 1 || eq.n_common == scen.n_common, ErrorKind::InvalidArgument,
            "equilibrium_log_index: common-path count mismatch");
    const auto& cg = benchmark.coeffs;
    IndexPath idx;
    idx.grid = scen.grid;
    idx.n_common = scen.n_common;
    idx.logmu.resize(scen.n_common * (scen.grid.steps + 1));
    double log0 = pop.mean_over_types([](std::size_t, const AgentType& ty) { return std::log(ty.x); });
    for (std::size_t c = 0; c < scen.n_common; ++c) {
        const std::size_t ce = eq.n_common == 1 ? 0 : c;
        double v = log0;
        idx.log_at(c, 0) = v;
        for (std::size_t m = 0; m < scen.grid.steps; ++m) {
            double drift = 0.0, load = 0.0;
            for (std::size_t k = 0; k < pop.n_types(); ++k) {
                double pi = eq.pi_star.at(k, ce, m);
                double h = cg.h.at(k, ce, m);
                double s2 = cg.s2(k, ce, m);
                drift += pop.weight(k) * pi * (h - 0.5 * pi * s2);
                load += pop.weight(k) * pi * cg.sigma0.at(k, ce, m);
            }
            v += drift * scen.grid.dt() + load * scen.dw0(c, m);
            idx.log_at(c, m + 1) = v;
        }
    }
    return idx;
}

FixedPointResult fixed_point_residual(const PopulationSpec& pop, const StrategyField& strat,
                                      const IndexPath& candidate, const ScenarioSet& scen) {
    WealthPanel panel = simulate_log_wealth(scen, pop, strat);
    IndexPath est = performance_index(panel, pop);

    FixedPointResult r;
    const std::size_t M = scen.grid.steps, P = scen.n_particles, C = scen.n_common;
    std::vector<double> buf(P);
    for (std::size_t m = 1; m <= M; ++m) {
        // residual averaged across common paths, against the aggregated
        // particle-estimator SE (independent particle noise per path)
        double agg = 0.0, var_agg = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            double diff = est.log_at(c, m) - candidate.log_at(c, m);
            r.sup_abs = std::max(r.sup_abs, std::abs(diff));
            agg += diff;
            for (std::size_t k = 0; k < pop.n_types(); ++k) {
                for (std::size_t p = 0; p < P; ++p) buf[p] = panel.at(k, c, p, m);
                double mean = pairwise_sum(buf) / static_cast<double>(P);
                double ss = 0.0;
                for (double v : buf) ss += (v - mean) * (v - mean);
                double w = pop.weight(k);
                var_agg += w * w * ss / (static_cast<double>(P) * std::max<double>(P - 1, 1));
            }
        }
        agg /= static_cast<double>(C);
        double se = std::sqrt(var_agg) / static_cast<double>(C);
        if (se > 0.0) {
            double z = std::abs(agg) / se;
            r.sup_z = std::max(r.sup_z, z);
            if (m == M) r.terminal_z = z;
        }
    }
    for (std::size_t c = 0; c < C; ++c)
        r.sup_abs = std::max(r.sup_abs, std::abs(est.log_at(c, 0) - candidate.log_at(c, 0)));
    return r;
}

MartingaleResult martingale_test(const PopulationSpec& pop, const StrategyField& strat, const YPathSpec& ypath,
                                 const ScenarioSet& scen, std::size_t n_checkpoints) {
    require(n_checkpoints >= 1 && n_checkpoints <= scen.grid.steps, ErrorKind::InvalidArgument,
            "martingale_test: bad checkpoint count");
    WealthPanel panel = simulate_log_wealth(scen, pop, strat);

    MartingaleResult res;
    for (std::size_t i = 0; i <= n_checkpoints; ++i)
        res.checkpoint_nodes.push_back(i * scen.grid.steps / n_checkpoints);

    const std::size_t K = pop.n_types(), C = scen.n_common, P = scen.n_particles;
    const std::size_t M = scen.grid.steps;
    res.increments.resize(K);
    std::vector<double> ypath_row;
    std::vector<double> incr(C * P), tot(C * P);
    for (std::size_t k = 0; k < K; ++k) {
        const AgentType& ty = pop.type(k);
        for (std::size_t c = 0; c < C; ++c) {
            roll_y(ypath, scen, k, c, ypath_row);
            for (std::size_t p = 0; p < P; ++p) {
                double r0 = std::exp(ty.gamma * panel.at(k, c, p, 0) + ypath_row[0]) / ty.gamma;
                double rT = std::exp(ty.gamma * panel.at(k, c, p, M) + ypath_row[M]) / ty.gamma;
                tot[c * P + p] = rT - r0;
            }
        }
        McStat total = cluster_stats(tot, C, P);
        res.total.push_back(total);
        if (total.se > 0.0) res.max_total_z = std::max(res.max_total_z, total.mean / total.se);

        for (std::size_t i = 0; i + 1 <= n_checkpoints; ++i) {
            std::size_t m0 = res.checkpoint_nodes[i], m1 = res.checkpoint_nodes[i + 1];
            for (std::size_t c = 0; c < C; ++c) {
                roll_y(ypath, scen, k, c, ypath_row);
                for (std::size_t p = 0; p < P; ++p) {
                    double r0 = std::exp(ty.gamma * panel.at(k, c, p, m0) + ypath_row[m0]) / ty.gamma;
                    double r1 = std::exp(ty.gamma * panel.at(k, c, p, m1) + ypath_row[m1]) / ty.gamma;
                    incr[c * P + p] = r1 - r0;
                }
            }
            McStat st = cluster_stats(incr, C, P);
            res.increments[k].push_back(st);
            if (st.se > 0.0) {
                double z = st.mean / st.se;
                res.max_abs_z = std::max(res.max_abs_z, std::abs(z));
                res.max_upward_z = std::max(res.max_upward_z, z);
            }
        }
    }
    return res;
}

std::vector<BestResponseGap> best_response_test(const PopulationSpec& pop, const StrategyField& strat,
                                                const std::vector<double>& deltas, const IndexPath& frozen_index,
                                                const ScenarioSet& scen) {
    require(!deltas.empty(), ErrorKind::InvalidArgument, "best_response_test: empty perturbation list");
    const std::size_t K = pop.n_types(), C = scen.n_common, P = scen.n_particles, M = scen.grid.steps;

    WealthPanel base = simulate_log_wealth(scen, pop, strat);
    std::vector<BestResponseGap> gaps;
    std::vector<double> diff(C * P);
    for (double d : deltas) {
        WealthPanel bumped = simulate_log_wealth(scen, pop, strat.shifted(d));
        for (std::size_t k = 0; k < K; ++k) {
            const AgentType& ty = pop.type(k);
            for (std::size_t c = 0; c < C; ++c) {
                const double logmuT = frozen_index.log_at(c, M);
                for (std::size_t p = 0; p < P; ++p) {
                    double ub = std::exp(ty.gamma * (base.at(k, c, p, M) - ty.theta * logmuT)) / ty.gamma;
                    double ud = std::exp(ty.gamma * (bumped.at(k, c, p, M) - ty.theta * logmuT)) / ty.gamma;
                    diff[c * P + p] = ud - ub;
                }
            }
            BestResponseGap g;
            g.delta = d;
            g.type_index = k;
            g.gap = cluster_stats(diff, C, P);
            gaps.push_back(g);
        }
    }
    return gaps;
}

ConvergenceTable nplayer_convergence(const PopulationSpec& base_pop, const std::vector<std::size_t>& n_list,
                                     std::size_t n_seeds, std::uint64_t seed) {
    require(!n_list.empty() && n_seeds >= 1, ErrorKind::InvalidArgument, "nplayer_convergence: empty inputs");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        require(n_list[i] > n_list[i - 1], ErrorKind::InvalidArgument,
                "nplayer_convergence: N list must increase");
    require(n_list.front() >= 2, ErrorKind::InvalidArgument, "nplayer_convergence: N must be >= 2");

    const std::size_t K = base_pop.n_types();
    std::vector<double> cdf(K);
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        acc += base_pop.weight(k);
        cdf[k] = acc;
    }
    std::vector<double> mfg_pi(K);
    for (std::size_t k = 0; k < K; ++k)
        mfg_pi[k] = closed_form::mfg_strategy_cell(base_pop, base_pop.type(k), 0);

    ConvergenceTable table;
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        const std::size_t N = n_list[ni];
        std::vector<double> per_seed(n_seeds);
        parallel_for(n_seeds, [&](std::size_t s) {
            std::vector<PlayerSpec> players(N);
            std::vector<std::size_t> kind(N);
            for (std::size_t i = 0; i < N; ++i) {
                double u = rng::to_uniform(rng::mix(seed, 0x4E, s, ni, i));
                std::size_t k = 0;
                while (k + 1 < K && u > cdf[k]) ++k;
                players[i] = base_pop.type(k);
                kind[i] = k;
            }
            auto pi = closed_form::nplayer_strategies_cell(players, 0);
            double err = 0.0;
            for (std::size_t i = 0; i < N; ++i) err += std::abs(pi[i] - mfg_pi[kind[i]]);
            per_seed[s] = err / static_cast<double>(N);
        });
        ConvergenceRow row;
        row.n_players = N;
        row.mean_error = pairwise_sum(per_seed) / static_cast<double>(n_seeds);
        table.rows.push_back(row);
    }

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const auto n = static_cast<double>(table.rows.size());
    for (const auto& r : table.rows) {
        double x = std::log(static_cast<double>(r.n_players));
        double y = std::log(std::max(r.mean_error, 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    table.slope = n > 1 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
    return table;
}

} // namespace verification
} // namespace mfpg
