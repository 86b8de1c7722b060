#include "mfpg/closed_form.hpp"

#include <algorithm>
#include <cmath>

namespace mfpg {
namespace closed_form {

namespace {

void require_deterministic(const AgentType& ty, const char* who) {
    require(ty.coeffs.deterministic(), ErrorKind::InvalidArgument,
            std::string(who) + ": type-measurable (deterministic) coefficients required");
}

void require_deterministic(const PopulationSpec& pop, const char* who) {
    for (const auto& e : pop.entries) require_deterministic(e.type, who);
}

struct CellCoeffs {
    double h, sigma, sigma0, s2; // s2 = sigma^2 + sigma0^2
};

CellCoeffs coeffs_at(const AgentType& ty, std::size_t cell) {
    CellCoeffs c;
    c.h = ty.coeffs.h_at(cell, 0.0, 0.0);
    c.sigma = ty.coeffs.sigma_at(cell, 0.0, 0.0);
    c.sigma0 = ty.coeffs.sigma0_at(cell, 0.0, 0.0);
    c.s2 = c.sigma * c.sigma + c.sigma0 * c.sigma0;
    return c;
}

std::size_t cell_of(const TimeGrid& grid, double t) {
    double u = t / grid.dt();
    if (u < 0.0) u = 0.0;
    auto cell = static_cast<std::size_t>(u);
    return std::min(cell, grid.steps - 1);
}

} // namespace

double merton_ratio_cell(const AgentType& type, std::size_t cell) {
    require_deterministic(type, "merton_ratio");
    CellCoeffs c = coeffs_at(type, cell);
    return c.h / ((1.0 - type.gamma) * c.s2);
}

double index_response_cell(const PopulationSpec& pop, std::size_t cell) {
    require_deterministic(pop, "index_response");
    double num = pop.mean_over_types([&](std::size_t, const AgentType& ty) {
        CellCoeffs c = coeffs_at(ty, cell);
        return c.sigma0 * c.h / ((1.0 - ty.gamma) * c.s2);
    });
    double den = 1.0 + pop.mean_over_types([&](std::size_t, const AgentType& ty) {
        CellCoeffs c = coeffs_at(ty, cell);
        return ty.theta * ty.gamma * c.sigma0 * c.sigma0 / ((1.0 - ty.gamma) * c.s2);
    });
    require(den > 1e-12, ErrorKind::DegeneratePopulation,
            "index_response: aggregation denominator not positive");
    return num / den;
}

std::pair<double, double> mfg_z0_cell(const PopulationSpec& pop, const AgentType& type, std::size_t cell) {
    require_deterministic(type, "mfg_z0");
    return {0.0, -type.theta * type.gamma * index_response_cell(pop, cell)};
}

double mfg_strategy_cell(const PopulationSpec& pop, const AgentType& type, std::size_t cell) {
    require_deterministic(type, "mfg_strategy");
    auto [z, z0] = mfg_z0_cell(pop, type, cell);
    (void)z;
    CellCoeffs c = coeffs_at(type, cell);
    return (c.h + c.sigma0 * z0) / ((1.0 - type.gamma) * c.s2);
}

double log_utility_strategy_cell(const AgentType& type, std::size_t cell) {
    require_deterministic(type, "log_utility_strategy");
    CellCoeffs c = coeffs_at(type, cell);
    return c.h / c.s2;
}

double merton_ratio(const AgentType& type, const TimeGrid& grid, double t) {
    return merton_ratio_cell(type, cell_of(grid, t));
}
std::pair<double, double> mfg_z0(const PopulationSpec& pop, const AgentType& type, const TimeGrid& grid,
                                 double t) {
    return mfg_z0_cell(pop, type, cell_of(grid, t));
}
double mfg_strategy(const PopulationSpec& pop, const AgentType& type, const TimeGrid& grid, double t) {
    return mfg_strategy_cell(pop, type, cell_of(grid, t));
}
double log_utility_strategy(const AgentType& type, const TimeGrid& grid, double t) {
    return log_utility_strategy_cell(type, cell_of(grid, t));
}

ValueResult mfg_value(const PopulationSpec& pop, const AgentType& type, const TimeGrid& grid) {
    require_deterministic(pop, "mfg_value");
    require_deterministic(type, "mfg_value");
    const double dt = grid.dt();
    const double tg = type.theta * type.gamma;

    double mean_logx = pop.mean_over_types([](std::size_t, const AgentType& ty) { return std::log(ty.x); });

    double y0 = -tg * mean_logx;
    for (std::size_t m = 0; m < grid.steps; ++m) {
        double response = index_response_cell(pop, m);
        // population term: mean of pi_bar * (h - (h + sigma0 z0)/(2(1-gamma)))
        // with each type's own z0
        double pop_term = pop.mean_over_types([&](std::size_t, const AgentType& ty) {
            CellCoeffs c = coeffs_at(ty, m);
            double z0j = -ty.theta * ty.gamma * response;
            double a = (1.0 - ty.gamma) * c.s2;
            double pibar = (c.h + c.sigma0 * z0j) / a;
            return pibar * (c.h - (c.h + c.sigma0 * z0j) / (2.0 * (1.0 - ty.gamma)));
        });
        CellCoeffs c = coeffs_at(type, m);
        double z0 = -tg * response;
        double numer = c.h + c.sigma0 * z0;
        double own_term = 0.5 * z0 * z0 +
                          type.gamma * numer * numer / (2.0 * (1.0 - type.gamma) * c.s2);
        y0 += (-tg * pop_term + own_term) * dt;
    }
    ValueResult r;
    r.y0 = y0;
    r.value = std::pow(type.x, type.gamma) * std::exp(y0) / type.gamma;
    return r;
}

double him_comparison_strategy(const PopulationSpec& pop, const AgentType& type) {
    require_deterministic(pop, "him_comparison_strategy");
    require(type.coeffs.mode == CoeffMode::Constant, ErrorKind::InvalidArgument,
            "him_comparison_strategy: constant coefficients required");
    for (const auto& e : pop.entries)
        require(e.type.coeffs.mode == CoeffMode::Constant, ErrorKind::InvalidArgument,
                "him_comparison_strategy: constant coefficients required");

    double num = pop.mean_over_types([&](std::size_t, const AgentType& ty) {
        CellCoeffs c = coeffs_at(ty, 0);
        return c.sigma0 * c.h / ((1.0 - ty.gamma) * c.s2);
    });
    double den = 1.0 + pop.mean_over_types([&](std::size_t, const AgentType& ty) {
        return ty.theta * ty.gamma / (1.0 - ty.gamma);
    });
    require(std::abs(den) > 1e-12, ErrorKind::DegeneratePopulation,
            "him_comparison_strategy: aggregation denominator vanishes");
    CellCoeffs c = coeffs_at(type, 0);
    return (c.h - type.theta * type.gamma * c.sigma0 * num / den) / ((1.0 - type.gamma) * c.s2);
}

std::vector<double> nplayer_strategies_cell(const std::vector<PlayerSpec>& players, std::size_t cell) {
    const std::size_t N = players.size();
    require(N >= 2, ErrorKind::InvalidArgument, "nplayer_strategies: N >= 2 required");
    for (const auto& p : players) {
        p.validate();
        require_deterministic(p, "nplayer_strategies");
    }
    const double nm1 = static_cast<double>(N - 1);

    std::vector<double> denom(N);
    double phi1 = 0.0, phi2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        CellCoeffs c = coeffs_at(players[i], cell);
        double gi = players[i].gamma, ti = players[i].theta;
        denom[i] = (1.0 - gi) * c.sigma * c.sigma + (1.0 - gi - ti * gi / nm1) * c.sigma0 * c.sigma0;
        require(denom[i] > 1e-14, ErrorKind::DegenerateGame, "nplayer_strategies: degenerate player denominator");
        phi1 += c.h * c.sigma0 / denom[i] / nm1;
        phi2 += ti * gi * c.sigma0 * c.sigma0 / denom[i] / nm1;
    }
    require(1.0 + phi2 > 1e-14, ErrorKind::DegenerateGame, "nplayer_strategies: degenerate aggregate");

    std::vector<double> pi(N);
    for (std::size_t i = 0; i < N; ++i) {
        CellCoeffs c = coeffs_at(players[i], cell);
        pi[i] = c.h / denom[i] -
                players[i].theta * players[i].gamma * c.sigma0 / denom[i] * phi1 / (1.0 + phi2);
    }
    return pi;
}

std::vector<double> nplayer_strategies(const std::vector<PlayerSpec>& players, const TimeGrid& grid, double t) {
    return nplayer_strategies_cell(players, cell_of(grid, t));
}

EquilibriumReport equilibrium_report(const PopulationSpec& pop, const TimeGrid& grid) {
    require_deterministic(pop, "equilibrium_report");
    const std::size_t K = pop.n_types();

    EquilibriumReport rep;
    rep.grid = grid;
    rep.z0 = Field(K, 1, grid.steps);
    rep.pi_star = Field(K, 1, grid.steps);
    rep.value_drift = Field(K, 1, grid.steps);
    rep.index_drift.resize(grid.steps);
    rep.index_load.resize(grid.steps);

    for (std::size_t m = 0; m < grid.steps; ++m) {
        double response = index_response_cell(pop, m);
        double drift = 0.0, load = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const AgentType& ty = pop.type(k);
            CellCoeffs c = coeffs_at(ty, m);
            double z0 = -ty.theta * ty.gamma * response;
            double numer = c.h + c.sigma0 * z0;
            double pi = numer / ((1.0 - ty.gamma) * c.s2);
            rep.z0.at(k, 0, m) = z0;
            rep.pi_star.at(k, 0, m) = pi;
            rep.value_drift.at(k, 0, m) =
                0.5 * z0 * z0 + ty.gamma * numer * numer / (2.0 * (1.0 - ty.gamma) * c.s2);
            drift += pop.weight(k) * pi * (c.h - 0.5 * pi * c.s2);
            load += pop.weight(k) * pi * c.sigma0;
        }
        rep.index_drift[m] = drift;
        rep.index_load[m] = load;
    }

    rep.y0.resize(K);
    rep.value.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        ValueResult v = mfg_value(pop, pop.type(k), grid);
        rep.y0[k] = v.y0;
        rep.value[k] = v.value;
    }
    return rep;
}

} // namespace closed_form
} // namespace mfpg
