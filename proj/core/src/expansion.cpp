#include "mfpg/expansion.hpp"

#include <cmath>

#include "mfpg/closed_form.hpp"

namespace mfpg {
namespace expansion {

namespace {

struct TypeParams {
    double gamma, theta, tg, omg;
};

std::vector<TypeParams> type_params(const PopulationSpec& pop) {
    std::vector<TypeParams> tp(pop.n_types());
    for (std::size_t k = 0; k < pop.n_types(); ++k) {
        const AgentType& ty = pop.type(k);
        tp[k] = {ty.gamma, ty.theta, ty.theta * ty.gamma, 1.0 - ty.gamma};
    }
    return tp;
}

// Bilinear coupling of two order slices at one lattice point.
inline double k_product(const bsde::CoeffGrid& cg, std::size_t k, std::size_t c, std::size_t m,
                        const Field& za, const Field& z0a, const Field& zb, const Field& z0b) {
    double s = cg.sigma.at(k, c, m), s0 = cg.sigma0.at(k, c, m);
    double la = s * za.at(k, c, m) + s0 * z0a.at(k, c, m);
    double lb = s * zb.at(k, c, m) + s0 * z0b.at(k, c, m);
    return la * lb / (2.0 * cg.s2(k, c, m));
}

} // namespace

ExpansionCoefficients expand(const ScenarioSet& scen, const PopulationSpec& pop,
                             const bsde::BenchmarkSolution& benchmark, std::size_t order,
                             const bsde::SolverConfig& cfg) {
    require(order >= 1, ErrorKind::InvalidArgument, "expand: order must be >= 1");
    const bsde::CoeffGrid& cg = benchmark.coeffs;
    const std::size_t K = cg.n_types, C = cg.n_common, M = scen.grid.steps;
    const double dt = scen.grid.dt();
    const bool deterministic = (C == 1);
    auto tp = type_params(pop);

    ExpansionCoefficients co;
    co.grid = scen.grid;
    co.n_types = K;
    co.n_common = C;
    co.order = order;

    // Benchmark conditional-mean path and loading.
    co.base_mean = Field(K, C, M + 1);
    co.base_load = Field(K, C, M);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t c = 0; c < C; ++c) {
            double x = std::log(pop.type(k).x);
            co.base_mean.at(k, c, 0) = x;
            for (std::size_t m = 0; m < M; ++m) {
                double h = cg.h.at(k, c, m), s = cg.sigma.at(k, c, m), s0 = cg.sigma0.at(k, c, m);
                double b = h + s * benchmark.z.at(k, c, m) + s0 * benchmark.z0.at(k, c, m);
                double pi = b / (tp[k].omg * cg.s2(k, c, m));
                double drift = pi * (h - b / (2.0 * tp[k].omg));
                double load = pi * s0;
                co.base_load.at(k, c, m) = load;
                x += drift * dt;
                if (!deterministic) x += load * scen.dw0(c, m);
                co.base_mean.at(k, c, m + 1) = x;
            }
        }

    bsde::Regression reg{cfg.basis_degree};
    std::vector<double> w0m(C), vals(C), prod(C);

    for (std::size_t i = 1; i <= order; ++i) {
        Field zi(K, C, M), z0i(K, C, M), yi(K, C, M + 1), xmean(K, C, M + 1), xload(K, C, M);

        const Field& prev_mean = (i == 1) ? co.base_mean : co.x_mean[i - 2];
        const Field& prev_load = (i == 1) ? co.base_load : co.x_load[i - 2];

        // Terminal value: per-type competition weight times the population
        // conditional mean of the previous-order forward state.
        for (std::size_t c = 0; c < C; ++c) {
            double mbar = 0.0;
            for (std::size_t k = 0; k < K; ++k) mbar += pop.weight(k) * prev_mean.at(k, c, M);
            for (std::size_t k = 0; k < K; ++k) yi.at(k, c, M) = -tp[k].tg * mbar;
        }

        // Forcing from already-solved orders.
        Field forcing(K, C, M); // driver forcing: gamma/(1-gamma) K-sums + Z-product sums
        Field xforce(K, C, M);  // forward-drift forcing: -K-sums/(1-gamma)^2
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t m = 0; m < M; ++m) {
                    double ksum = 0.0, zsum = 0.0;
                    for (std::size_t j = 1; j + 1 <= i; ++j) {
                        const Field &za = co.z[j - 1], &z0a = co.z0[j - 1];
                        const Field &zb = co.z[i - j - 1], &z0b = co.z0[i - j - 1];
                        ksum += k_product(cg, k, c, m, za, z0a, zb, z0b);
                        zsum += 0.5 * (za.at(k, c, m) * zb.at(k, c, m) +
                                       z0a.at(k, c, m) * z0b.at(k, c, m));
                    }
                    forcing.at(k, c, m) = tp[k].gamma / tp[k].omg * ksum + zsum;
                    xforce.at(k, c, m) = -ksum / (tp[k].omg * tp[k].omg);
                }

        if (deterministic) {
            // Loading of the terminal determines the common-noise integrand
            // directly; the backbone integrates backward.
            for (std::size_t m = 0; m < M; ++m) {
                double cbar = 0.0;
                for (std::size_t k = 0; k < K; ++k) cbar += pop.weight(k) * prev_load.at(k, 0, m);
                for (std::size_t k = 0; k < K; ++k) z0i.at(k, 0, m) = -tp[k].tg * cbar;
            }
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t m = M; m-- > 0;) {
                    double h = cg.h.at(k, 0, m), s = cg.sigma.at(k, 0, m), s0 = cg.sigma0.at(k, 0, m);
                    double b = h + s * benchmark.z.at(k, 0, m) + s0 * benchmark.z0.at(k, 0, m);
                    double zl = s * zi.at(k, 0, m) + s0 * z0i.at(k, 0, m);
                    double f = tp[k].gamma * zl * b / (tp[k].omg * cg.s2(k, 0, m)) +
                               benchmark.z.at(k, 0, m) * zi.at(k, 0, m) +
                               benchmark.z0.at(k, 0, m) * z0i.at(k, 0, m) + forcing.at(k, 0, m);
                    yi.at(k, 0, m) = yi.at(k, 0, m + 1) + f * dt;
                }
        } else {
            for (std::size_t m = M; m-- > 0;) {
                const double tm = scen.grid.node(m);
                for (std::size_t c = 0; c < C; ++c) w0m[c] = scen.w0_at(c, m);
                for (std::size_t k = 0; k < K; ++k) {
                    for (std::size_t c = 0; c < C; ++c) {
                        vals[c] = yi.at(k, c, m + 1);
                        prod[c] = vals[c] * scen.dw0(c, m) / dt;
                    }
                    auto cond = reg.fit(w0m, vals, tm);
                    auto zfit = reg.fit(w0m, prod, tm);
                    for (std::size_t c = 0; c < C; ++c) {
                        double z0v = zfit[c];
                        z0i.at(k, c, m) = z0v;
                        double h = cg.h.at(k, c, m), s = cg.sigma.at(k, c, m), s0 = cg.sigma0.at(k, c, m);
                        double b = h + s * benchmark.z.at(k, c, m) + s0 * benchmark.z0.at(k, c, m);
                        double zl = s0 * z0v;
                        double f = tp[k].gamma * zl * b / (tp[k].omg * cg.s2(k, c, m)) +
                                   benchmark.z0.at(k, c, m) * z0v + forcing.at(k, c, m);
                        yi.at(k, c, m) = cond[c] + f * dt;
                    }
                }
            }
        }

        // Forward correction: conditional-mean path and loading.
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t c = 0; c < C; ++c) {
                double x = 0.0;
                xmean.at(k, c, 0) = 0.0;
                for (std::size_t m = 0; m < M; ++m) {
                    double h = cg.h.at(k, c, m), s = cg.sigma.at(k, c, m), s0 = cg.sigma0.at(k, c, m);
                    double b = h + s * benchmark.z.at(k, c, m) + s0 * benchmark.z0.at(k, c, m);
                    double zl = s * zi.at(k, c, m) + s0 * z0i.at(k, c, m);
                    double drift = zl / (tp[k].omg * cg.s2(k, c, m)) * (h - b / tp[k].omg) +
                                   xforce.at(k, c, m);
                    double load = zl * s0 / (tp[k].omg * cg.s2(k, c, m));
                    xload.at(k, c, m) = load;
                    x += drift * dt;
                    if (!deterministic) x += load * scen.dw0(c, m);
                    xmean.at(k, c, m + 1) = x;
                }
            }

        co.z.push_back(std::move(zi));
        co.z0.push_back(std::move(z0i));
        co.y.push_back(std::move(yi));
        co.x_mean.push_back(std::move(xmean));
        co.x_load.push_back(std::move(xload));
    }
    return co;
}

ValueExpansion reconstruct_value_expansion(const ExpansionCoefficients& coeffs,
                                           const bsde::BenchmarkSolution& benchmark,
                                           const PopulationSpec& pop, double theta) {
    const bsde::CoeffGrid& cg = benchmark.coeffs;
    const std::size_t K = coeffs.n_types, C = coeffs.n_common, M = coeffs.grid.steps;
    auto tp = type_params(pop);

    ValueExpansion ve;
    ve.logv_ratio0.assign(K, 0.0);
    ve.pi_correction = Field(K, C, M);

    double th = 1.0;
    for (std::size_t i = 1; i <= coeffs.order; ++i) {
        th *= theta;
        for (std::size_t k = 0; k < K; ++k) {
            double y0 = 0.0;
            for (std::size_t c = 0; c < C; ++c) y0 += coeffs.y[i - 1].at(k, c, 0);
            ve.logv_ratio0[k] += th * y0 / static_cast<double>(C);
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t m = 0; m < M; ++m) {
                    double zl = cg.sigma.at(k, c, m) * coeffs.z[i - 1].at(k, c, m) +
                                cg.sigma0.at(k, c, m) * coeffs.z0[i - 1].at(k, c, m);
                    ve.pi_correction.at(k, c, m) += th * zl / (tp[k].omg * cg.s2(k, c, m));
                }
        }
    }
    return ve;
}

PopulationSpec scale_thetas(const PopulationSpec& pop, double factor) {
    require(factor >= 0.0, ErrorKind::InvalidArgument, "scale_thetas: factor must be >= 0");
    PopulationSpec scaled = pop;
    for (auto& e : scaled.entries) {
        e.type.theta *= factor;
        require(e.type.theta <= 1.0, ErrorKind::InvalidArgument, "scale_thetas: scaled theta leaves [0,1]");
    }
    return scaled;
}

OrderCheck expansion_order_check(const ExpansionCoefficients& coeffs,
                                 const bsde::BenchmarkSolution& benchmark, const PopulationSpec& pop,
                                 const std::vector<double>& theta_list) {
    require(coeffs.n_common == 1, ErrorKind::InvalidArgument,
            "expansion_order_check: deterministic coefficients required");
    require(theta_list.size() >= 2, ErrorKind::InvalidArgument,
            "expansion_order_check: at least two scale factors required");
    for (double t : theta_list)
        require(t > 0.0, ErrorKind::InvalidArgument, "expansion_order_check: scale factors must be positive");

    const bsde::CoeffGrid& cg = benchmark.coeffs;
    const std::size_t K = coeffs.n_types, M = coeffs.grid.steps;

    OrderCheck oc;
    oc.thetas = theta_list;
    for (double lam : theta_list) {
        PopulationSpec scaled = scale_thetas(pop, lam);
        ValueExpansion ve = reconstruct_value_expansion(coeffs, benchmark, pop, lam);
        double err = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t m = 0; m < M; ++m) {
                double truth = closed_form::mfg_strategy_cell(scaled, scaled.type(k), m);
                double base = benchmark.strategy.at(k, 0, m);
                (void)cg;
                double recon = base + ve.pi_correction.at(k, 0, m);
                err = std::max(err, std::abs(truth - recon));
            }
        oc.errors.push_back(err);
    }

    bool all_zero = true;
    for (double e : oc.errors)
        if (e >= 1e-14) all_zero = false;
    if (all_zero) {
        oc.exact_zero = true;
        return oc;
    }

    // Least-squares slope of log error against log theta.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const auto n = static_cast<double>(theta_list.size());
    for (std::size_t i = 0; i < theta_list.size(); ++i) {
        double x = std::log(theta_list[i]);
        double y = std::log(std::max(oc.errors[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    oc.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return oc;
}

} // namespace expansion
} // namespace mfpg
