#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "mfpg/verification.hpp"

using namespace mfpg;
using namespace mfpg::verification;

namespace {

struct Setup {
    PopulationSpec pop;
    TimeGrid grid;
    closed_form::EquilibriumReport rep;
    ScenarioSet scen;
    StrategyField strat;
    IndexPath candidate;
};

Setup make_setup(const PopulationSpec& pop, std::size_t M, std::size_t n_common, std::size_t n_particles,
                 std::uint64_t seed) {
    Setup s{pop, TimeGrid(1.0, M), {}, {}, {}, {}};
    s.rep = closed_form::equilibrium_report(pop, s.grid);
    s.scen = build_scenarios(pop, s.grid, n_common, n_particles, seed);
    s.strat.grid = s.grid;
    s.strat.values = s.rep.pi_star;
    s.candidate = equilibrium_log_index(pop, s.rep, s.scen);
    return s;
}

} // namespace

TEST_CASE("fixed-point residual") {
    SUBCASE("zero strategy against the constant index is exactly zero") {
        auto pop = testpop::single_tau1();
        TimeGrid grid(1.0, 8);
        auto scen = build_scenarios(pop, grid, 4, 16, 3);
        auto strat = StrategyField::constant(grid, 1, 0.0);
        IndexPath candidate;
        candidate.grid = grid;
        candidate.n_common = 4;
        candidate.logmu.assign(4 * 9, 0.0);
        auto r = fixed_point_residual(pop, strat, candidate, scen);
        CHECK(r.sup_abs == 0.0);
        CHECK(r.sup_z == 0.0);
    }
    SUBCASE("equilibrium passes within estimator noise; the wrong strategy fails loudly") {
        auto s = make_setup(testpop::single_tau1(), 32, 64, 256, 4242);
        auto ok = fixed_point_residual(s.pop, s.strat, s.candidate, s.scen);
        CHECK(ok.terminal_z <= 2.0);
        CHECK(ok.sup_z <= 4.0);

        StrategyField merton = StrategyField::constant(s.grid, 1, 2.5);
        auto bad = fixed_point_residual(s.pop, merton, s.candidate, s.scen);
        CHECK(bad.sup_z >= 5.0);
        CHECK(bad.terminal_z >= 5.0);
    }
}

TEST_CASE("optimality of the equilibrium strategy") {
    // deviation drift detection needs independent paths: one particle per
    // common realization
    auto s = make_setup(testpop::single_tau1(), 32, 100000, 1, 71);

    SUBCASE("value process increments are driftless at the optimum") {
        auto mart = martingale_test(s.pop, s.strat, ypath_from_closed_form(s.rep), s.scen);
        CHECK(mart.max_abs_z <= 3.0);
        CHECK(std::abs(mart.max_total_z) <= 3.0);
    }
    SUBCASE("the no-competition optimum is driftless in its own problem") {
        auto s0 = make_setup(testpop::single_tau1(0.0), 32, 100000, 1, 72);
        auto mart = martingale_test(s0.pop, s0.strat, ypath_from_closed_form(s0.rep), s0.scen);
        CHECK(mart.max_abs_z <= 3.0);
    }
    SUBCASE("perturbed strategies drift down beyond noise over the horizon") {
        auto big = make_setup(testpop::single_tau1(), 32, 200000, 1, 73);
        auto bumped = big.strat.shifted(0.5);
        auto mart = martingale_test(big.pop, bumped, ypath_from_closed_form(big.rep), big.scen);
        // gamma > 0: R > 0 and the perturbation drags the whole horizon down
        CHECK(mart.max_total_z < -3.0);
        CHECK(mart.max_upward_z <= 3.0); // still a supermartingale within noise blockwise
    }
    SUBCASE("the value process tests need no sign split for risk-tolerant types") {
        // gamma < 0 makes R negative; optimality still means driftless R and
        // perturbations still push E[R] down
        auto pop = PopulationSpec::single(testpop::tau2());
        auto sn = make_setup(pop, 32, 100000, 1, 74);
        auto mart = martingale_test(pop, sn.strat, ypath_from_closed_form(sn.rep), sn.scen);
        CHECK(mart.max_abs_z <= 3.0);
        auto bumped = sn.strat.shifted(0.5);
        auto drift = martingale_test(pop, bumped, ypath_from_closed_form(sn.rep), sn.scen);
        CHECK(drift.max_total_z < -3.0);
    }
}

TEST_CASE("unilateral deviations never help") {
    auto s = make_setup(testpop::single_tau1(), 32, 100000, 1, 555);

    SUBCASE("the null deviation is a bit-exact zero (common random numbers)") {
        auto gaps = best_response_test(s.pop, s.strat, {0.0}, s.candidate, s.scen);
        CHECK(gaps.size() == 1);
        CHECK(gaps[0].gap.mean == 0.0);
        CHECK(gaps[0].gap.se == 0.0);
    }
    SUBCASE("constant shifts lose utility beyond noise") {
        auto gaps = best_response_test(s.pop, s.strat, {-0.5, -0.25, 0.25, 0.5}, s.candidate, s.scen);
        for (const auto& g : gaps) {
            CHECK(g.gap.mean < 0.0);
            CHECK(g.gap.mean + 3.0 * g.gap.se < 0.0);
        }
    }
    SUBCASE("a nearly-log investor is insensitive to the competition weight") {
        AgentType ty = testpop::tau1();
        ty.gamma = 0.01;
        auto pop = PopulationSpec::single(ty);
        auto su = make_setup(pop, 32, 50000, 1, 556);
        // the log-utility ratio is theta-free; as an equilibrium candidate it
        // should not be beatable beyond noise for small gamma
        StrategyField logstrat = StrategyField::constant(su.grid, 1, 1.25);
        auto gaps = best_response_test(pop, logstrat, {-0.25, 0.25}, su.candidate, su.scen);
        for (const auto& g : gaps) CHECK(g.gap.mean <= 3.0 * g.gap.se);
    }
}

TEST_CASE("finite-game convergence to the mean-field strategy") {
    SUBCASE("single-type games agree for every N") {
        auto table = nplayer_convergence(testpop::single_tau1(), {2, 4, 8, 16, 32, 64}, 4, 9);
        for (const auto& r : table.rows) CHECK(r.mean_error <= 1e-12);
    }
    SUBCASE("sampled mixtures converge at a root-N-like rate") {
        auto table = nplayer_convergence(testpop::mixture(), {4, 16, 64, 256}, 64, 2025);
        for (std::size_t i = 1; i < table.rows.size(); ++i)
            CHECK(table.rows[i].mean_error < table.rows[i - 1].mean_error);
        CHECK(table.slope >= -0.8);
        CHECK(table.slope <= -0.2);
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(nplayer_convergence(testpop::mixture(), {4, 4}, 4, 1), Error);
        CHECK_THROWS_AS(nplayer_convergence(testpop::mixture(), {1, 4}, 4, 1), Error);
    }
}

TEST_CASE("audits are deterministic given the seed") {
    auto s = make_setup(testpop::single_tau1(), 16, 16, 32, 2718);
    auto a = fixed_point_residual(s.pop, s.strat, s.candidate, s.scen);
    auto b = fixed_point_residual(s.pop, s.strat, s.candidate, s.scen);
    CHECK(a.sup_abs == b.sup_abs);
    CHECK(a.sup_z == b.sup_z);
}
