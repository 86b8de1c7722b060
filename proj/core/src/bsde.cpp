#include "mfpg/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mfpg/parallel.hpp"

namespace mfpg {
namespace bsde {

namespace {

constexpr double kRidge = 1e-10;

double pop_log_x(const PopulationSpec& pop) {
    return pop.mean_over_types([](std::size_t, const AgentType& ty) { return std::log(ty.x); });
}

// Solves the (d+1)x(d+1) SPD system G a = b in place.
void cholesky_solve(std::vector<double>& G, std::vector<double>& b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = G[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= G[i * n + k] * G[j * n + k];
            if (i == j) {
                G[i * n + i] = std::sqrt(std::max(s, 1e-300));
            } else {
                G[i * n + j] = s / G[j * n + j];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= G[i * n + k] * b[k];
        b[i] = s / G[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= G[k * n + ii] * b[k];
        b[ii] = s / G[ii * n + ii];
    }
}

struct TypeParams {
    double gamma, theta, tg, one_m_gamma;
};

std::vector<TypeParams> type_params(const PopulationSpec& pop) {
    std::vector<TypeParams> tp(pop.n_types());
    for (std::size_t k = 0; k < pop.n_types(); ++k) {
        const AgentType& ty = pop.type(k);
        tp[k] = {ty.gamma, ty.theta, ty.theta * ty.gamma, 1.0 - ty.gamma};
    }
    return tp;
}

} // namespace

CoeffGrid eval_coeff_grid(const PopulationSpec& pop, const ScenarioSet& scen) {
    CoeffGrid cg;
    cg.grid = scen.grid;
    cg.n_types = pop.n_types();
    cg.n_common = pop.deterministic_coeffs() ? 1 : scen.n_common;
    const std::size_t M = scen.grid.steps;
    cg.h = Field(cg.n_types, cg.n_common, M);
    cg.sigma = Field(cg.n_types, cg.n_common, M);
    cg.sigma0 = Field(cg.n_types, cg.n_common, M);
    for (std::size_t k = 0; k < cg.n_types; ++k) {
        const auto& cm = pop.type(k).coeffs;
        for (std::size_t c = 0; c < cg.n_common; ++c) {
            for (std::size_t m = 0; m < M; ++m) {
                double t = scen.grid.node(m);
                double w0 = cg.n_common > 1 ? scen.w0_at(c, m) : 0.0;
                cg.h.at(k, c, m) = cm.h_at(m, t, w0);
                cg.sigma.at(k, c, m) = cm.sigma_at(m, t, w0);
                cg.sigma0.at(k, c, m) = cm.sigma0_at(m, t, w0);
            }
        }
    }
    return cg;
}

CoeffGrid eval_coeff_grid_deterministic(const PopulationSpec& pop, const TimeGrid& grid) {
    require(pop.deterministic_coeffs(), ErrorKind::InvalidArgument,
            "eval_coeff_grid_deterministic: deterministic coefficients required");
    CoeffGrid cg;
    cg.grid = grid;
    cg.n_types = pop.n_types();
    cg.n_common = 1;
    const std::size_t M = grid.steps;
    cg.h = Field(cg.n_types, 1, M);
    cg.sigma = Field(cg.n_types, 1, M);
    cg.sigma0 = Field(cg.n_types, 1, M);
    for (std::size_t k = 0; k < cg.n_types; ++k) {
        const auto& cm = pop.type(k).coeffs;
        for (std::size_t m = 0; m < M; ++m) {
            cg.h.at(k, 0, m) = cm.h_at(m, grid.node(m), 0.0);
            cg.sigma.at(k, 0, m) = cm.sigma_at(m, grid.node(m), 0.0);
            cg.sigma0.at(k, 0, m) = cm.sigma0_at(m, grid.node(m), 0.0);
        }
    }
    return cg;
}

std::vector<double> Regression::fit(std::span<const double> w0_levels, std::span<const double> values,
                                    double t_scale) const {
    const std::size_t C = values.size();
    auto flat_mean = [&] {
        double s = 0.0;
        for (double v : values) s += v;
        return std::vector<double>(C, s / static_cast<double>(C));
    };
    if (degree == 0 || C < degree + 2 || t_scale <= 0.0) return flat_mean();

    const double sc = std::sqrt(t_scale);
    const std::size_t n = degree + 1;
    std::vector<double> G(n * n, 0.0), b(n, 0.0), pw(n);
    for (std::size_t c = 0; c < C; ++c) {
        double u = w0_levels[c] / sc;
        pw[0] = 1.0;
        for (std::size_t j = 1; j < n; ++j) pw[j] = pw[j - 1] * u;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j) G[i * n + j] += pw[i] * pw[j];
            b[i] += pw[i] * values[c];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) G[i * n + j] = G[j * n + i];
        G[i * n + i] += kRidge * static_cast<double>(C);
    }
    cholesky_solve(G, b, n);

    std::vector<double> out(C);
    for (std::size_t c = 0; c < C; ++c) {
        double u = w0_levels[c] / sc, acc = b[0], p = 1.0;
        for (std::size_t j = 1; j < n; ++j) {
            p *= u;
            acc += b[j] * p;
        }
        out[c] = acc;
    }
    return out;
}

BenchmarkSolution solve_benchmark(const ScenarioSet& scen, const PopulationSpec& pop, const SolverConfig& cfg) {
    pop.validate();
    BenchmarkSolution bench;
    bench.grid = scen.grid;
    bench.coeffs = eval_coeff_grid(pop, scen);
    const CoeffGrid& cg = bench.coeffs;
    const std::size_t K = cg.n_types, C = cg.n_common, M = scen.grid.steps;
    const double dt = scen.grid.dt();
    auto tp = type_params(pop);

    bench.y = Field(K, C, M + 1);
    bench.z = Field(K, C, M);
    bench.z0 = Field(K, C, M);

    const bool deterministic = (C == 1);
    if (deterministic) {
        // Exact: the value integrand is a known function of time per type.
        for (std::size_t k = 0; k < K; ++k) {
            double acc = 0.0;
            bench.y.at(k, 0, M) = 0.0;
            for (std::size_t m = M; m-- > 0;) {
                double h = cg.h.at(k, 0, m), s2 = cg.s2(k, 0, m);
                acc += tp[k].gamma * h * h / (2.0 * tp[k].one_m_gamma * s2) * dt;
                bench.y.at(k, 0, m) = acc;
            }
        }
        bench.iterations = 1;
        bench.residual = 0.0;
    } else {
        // Coefficients depend on the common path only, so the value process
        // is adapted to the common filtration and the idiosyncratic
        // integrand vanishes identically. Backward regression with the
        // driver's quadratic term iterated on a frozen argument.
        Regression reg{cfg.basis_degree};
        Field z0_frozen(K, C, M);
        Field y_prev(K, C, M + 1);
        std::size_t it = 0;
        double delta = 0.0;
        std::vector<double> w0m(C), vals(C), prod(C);
        for (it = 1; it <= cfg.max_iter; ++it) {
            Field y(K, C, M + 1), z0(K, C, M);
            for (std::size_t m = M; m-- > 0;) {
                const double tm = scen.grid.node(m);
                for (std::size_t c = 0; c < C; ++c) w0m[c] = scen.w0_at(c, m);
                for (std::size_t k = 0; k < K; ++k) {
                    for (std::size_t c = 0; c < C; ++c) {
                        vals[c] = y.at(k, c, m + 1);
                        prod[c] = vals[c] * scen.dw0(c, m) / dt;
                    }
                    auto cond = reg.fit(w0m, vals, tm);
                    auto zfit = reg.fit(w0m, prod, tm);
                    for (std::size_t c = 0; c < C; ++c) {
                        double znew = zfit[c];
                        double zq = z0_frozen.at(k, c, m); // frozen quadratic argument
                        double h = cg.h.at(k, c, m), s0 = cg.sigma0.at(k, c, m), s2 = cg.s2(k, c, m);
                        double numer = h + s0 * znew;
                        double f = 0.5 * zq * znew +
                                   tp[k].gamma * numer * numer / (2.0 * tp[k].one_m_gamma * s2);
                        z0.at(k, c, m) = znew;
                        y.at(k, c, m) = cond[c] + f * dt;
                    }
                }
            }
            delta = sup_abs_diff(z0, z0_frozen) + sup_abs_diff(y, y_prev);
            z0_frozen = z0;
            y_prev = y;
            if (delta < std::max(cfg.tol, 1e-12)) break;
        }
        require(it <= cfg.max_iter, ErrorKind::SolverDiverged,
                "solve_benchmark: no convergence; last delta " + std::to_string(delta));
        bench.y = y_prev;
        bench.z0 = z0_frozen;
        bench.iterations = it;
        bench.residual = delta;
    }

    bench.strategy = Field(K, C, M);
    bench.drift_w = Field(K, C, M);
    bench.drift_w0 = Field(K, C, M);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t m = 0; m < M; ++m) {
                double h = cg.h.at(k, c, m), s = cg.sigma.at(k, c, m), s0 = cg.sigma0.at(k, c, m);
                double a = tp[k].one_m_gamma * cg.s2(k, c, m);
                double b = h + s * bench.z.at(k, c, m) + s0 * bench.z0.at(k, c, m);
                bench.strategy.at(k, c, m) = b / a;
                bench.drift_w.at(k, c, m) = bench.z.at(k, c, m) + tp[k].gamma * s * b / a;
                bench.drift_w0.at(k, c, m) = bench.z0.at(k, c, m) + tp[k].gamma * s0 * b / a;
            }
    return bench;
}

NotationPack notation_pack(const PopulationSpec& pop, const BenchmarkSolution& benchmark) {
    const CoeffGrid& cg = benchmark.coeffs;
    const std::size_t K = cg.n_types, C = cg.n_common, M = cg.grid.steps;
    auto tp = type_params(pop);

    NotationPack p;
    p.phi_s = Field(K, C, M);
    p.phi_s0 = Field(K, C, M);
    p.f_s = Field(K, C, M);
    p.f_s0 = Field(K, C, M);
    p.f_h = Field(K, C, M);
    p.psi = Field(K, C, M);
    p.psi_s = Field(K, C, M);
    p.psi_s0 = Field(K, C, M);
    p.phi1 = Field(K, C, M);
    p.phi2 = Field(K, C, M);
    p.phi3 = Field(K, C, M);
    p.phi4 = Field(K, C, M);
    p.g = Field(1, C, M);

    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t m = 0; m < M; ++m) {
                double h = cg.h.at(k, c, m), s = cg.sigma.at(k, c, m), s0 = cg.sigma0.at(k, c, m);
                double a = tp[k].one_m_gamma * cg.s2(k, c, m);
                double zb = benchmark.z.at(k, c, m), z0b = benchmark.z0.at(k, c, m);
                double b = h + s * zb + s0 * z0b;
                p.phi_s.at(k, c, m) = 1.0 + tp[k].gamma * s * s / a;
                p.phi_s0.at(k, c, m) = 1.0 + tp[k].gamma * s0 * s0 / a;
                p.f_s.at(k, c, m) = s * h / a;
                p.f_s0.at(k, c, m) = s0 * h / a;
                p.f_h.at(k, c, m) = h * h / a;
                p.psi.at(k, c, m) = s * s0 / a;
                p.psi_s.at(k, c, m) = s * s / a;
                p.psi_s0.at(k, c, m) = s0 * s0 / a;
                p.phi1.at(k, c, m) = s0 * b / a;
                p.phi2.at(k, c, m) = s * b / a;
                p.phi3.at(k, c, m) = z0b + tp[k].gamma * s0 * b / a;
                p.phi4.at(k, c, m) = zb + tp[k].gamma * s * b / a;
            }
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t m = 0; m < M; ++m) {
            double acc = 0.0;
            for (std::size_t k = 0; k < K; ++k) acc += pop.weight(k) * tp[k].tg * p.psi_s0.at(k, c, m);
            p.g.at(0, c, m) = -acc;
        }
    return p;
}

namespace {

inline double j1_point(const NotationPack& p, const TypeParams& tp, std::size_t k, std::size_t c,
                       std::size_t m, double z, double z0, bool with_linear) {
    double q = 0.5 * p.phi_s.at(k, c, m) * z * z + 0.5 * p.phi_s0.at(k, c, m) * z0 * z0 +
               tp.gamma * p.psi.at(k, c, m) * z * z0;
    if (with_linear) q += p.phi4.at(k, c, m) * z + p.phi3.at(k, c, m) * z0;
    return q;
}

} // namespace

Field driver_base(const NotationPack& pack, const PopulationSpec& pop, const Field& z, const Field& z0) {
    auto tp = type_params(pop);
    Field out(z.n_types, z.n_common, z.n_time);
    for (std::size_t k = 0; k < z.n_types; ++k)
        for (std::size_t c = 0; c < z.n_common; ++c)
            for (std::size_t m = 0; m < z.n_time; ++m)
                out.at(k, c, m) = j1_point(pack, tp[k], k, c, m, z.at(k, c, m), z0.at(k, c, m), true);
    return out;
}

Field driver_base_quadratic(const NotationPack& pack, const PopulationSpec& pop, const Field& z,
                            const Field& z0) {
    auto tp = type_params(pop);
    Field out(z.n_types, z.n_common, z.n_time);
    for (std::size_t k = 0; k < z.n_types; ++k)
        for (std::size_t c = 0; c < z.n_common; ++c)
            for (std::size_t m = 0; m < z.n_time; ++m)
                out.at(k, c, m) = j1_point(pack, tp[k], k, c, m, z.at(k, c, m), z0.at(k, c, m), false);
    return out;
}

Field driver_coupling(const NotationPack& pack, const PopulationSpec& pop, const BenchmarkSolution& benchmark,
                      const Field& z, const Field& z0) {
    const std::size_t K = z.n_types, C = z.n_common, M = z.n_time;
    auto tp = type_params(pop);
    Field out(K, C, M);

    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t m = 0; m < M; ++m) {
            const double g = pack.g.at(0, c, m);
            const double dg = 1.0 - g;
            require(std::abs(dg) > 1e-12, ErrorKind::TransformationDegenerate,
                    "driver_coupling: 1 - g vanishes");
            double v = 0.0, e1 = 0.0, e2 = 0.0, e3 = 0.0, e4 = 0.0;
            double qa = 0.0, la = 0.0, lb = 0.0, cst = 0.0, qc = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const double w = pop.weight(k);
                const double zk = z.at(k, c, m), z0k = z0.at(k, c, m);
                const double psi = pack.psi.at(k, c, m), psis0 = pack.psi_s0.at(k, c, m);
                const double psis = pack.psi_s.at(k, c, m);
                const double load = psi * zk + psis0 * z0k;
                v += w * (load + pack.phi1.at(k, c, m));
                e1 += w * tp[k].tg * load / tp[k].one_m_gamma;
                e2 += w * tp[k].tg * tp[k].tg * psis0 / (2.0 * tp[k].one_m_gamma);
                e3 += w * tp[k].tg * pack.f_s0.at(k, c, m);
                e4 += w * tp[k].tg * pack.phi1.at(k, c, m) / tp[k].one_m_gamma;
                qa += w * (psis * zk * zk + 2.0 * psi * zk * z0k + psis0 * z0k * z0k) /
                      (2.0 * tp[k].one_m_gamma);
                la += w * (pack.f_s.at(k, c, m) * zk + pack.f_s0.at(k, c, m) * z0k);
                lb += w * (pack.phi2.at(k, c, m) * zk + pack.phi1.at(k, c, m) * z0k) / tp[k].one_m_gamma;
                cst += w * (pack.f_h.at(k, c, m) + pack.f_s.at(k, c, m) * benchmark.z.at(k, c, m) +
                            pack.f_s0.at(k, c, m) * benchmark.z0.at(k, c, m));
                const double p1 = pack.phi1.at(k, c, m), p2 = pack.phi2.at(k, c, m);
                qc += w * 0.5 * (p1 * p1 + p2 * p2);
            }
            const double wv = v / dg;
            for (std::size_t k = 0; k < K; ++k) {
                const double zk = z.at(k, c, m), z0k = z0.at(k, c, m);
                const double u = tp[k].tg * wv;
                const double load = pack.psi.at(k, c, m) * zk + pack.psi_s0.at(k, c, m) * z0k;
                out.at(k, c, m) = -u * z0k - pack.phi3.at(k, c, m) * u - tp[k].gamma * u * load +
                                  0.5 * pack.phi_s0.at(k, c, m) * u * u +
                                  tp[k].tg * (qa - wv * e1 + wv * wv * e2 - la + lb + wv * (e3 - e4) -
                                              cst + qc);
            }
        }
    }
    return out;
}

double ball_radius(const PopulationSpec& pop) {
    double c1 = 0.0;
    for (const auto& e : pop.entries) c1 = std::max(c1, 1.0 / (1.0 - e.type.gamma));
    return 1.0 / (4.0 * std::sqrt(2.0) * c1);
}

std::pair<Field, Field> forward_transform(const Field& z_diff, const Field& z0_diff, const NotationPack& pack,
                                          const PopulationSpec& pop) {
    require(z_diff.same_shape(z0_diff), ErrorKind::InvalidArgument, "forward_transform: shape mismatch");
    auto tp = type_params(pop);
    const std::size_t K = z_diff.n_types, C = z_diff.n_common, M = z_diff.n_time;
    Field z_aux = z_diff;
    Field z0_aux(K, C, M);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t m = 0; m < M; ++m) {
            double v = 0.0;
            for (std::size_t k = 0; k < K; ++k)
                v += pop.weight(k) * (pack.psi.at(k, c, m) * z_diff.at(k, c, m) +
                                      pack.psi_s0.at(k, c, m) * z0_diff.at(k, c, m) +
                                      pack.phi1.at(k, c, m));
            for (std::size_t k = 0; k < K; ++k)
                z0_aux.at(k, c, m) = z0_diff.at(k, c, m) + tp[k].tg * v;
        }
    return {std::move(z_aux), std::move(z0_aux)};
}

std::pair<Field, Field> invert_transform(const Field& z_aux, const Field& z0_aux, const NotationPack& pack,
                                         const PopulationSpec& pop) {
    require(z_aux.same_shape(z0_aux), ErrorKind::InvalidArgument, "invert_transform: shape mismatch");
    auto tp = type_params(pop);
    const std::size_t K = z_aux.n_types, C = z_aux.n_common, M = z_aux.n_time;
    Field z_diff = z_aux;
    Field z0_diff(K, C, M);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t m = 0; m < M; ++m) {
            const double dg = 1.0 - pack.g.at(0, c, m);
            require(std::abs(dg) > 1e-12, ErrorKind::TransformationDegenerate,
                    "invert_transform: 1 + E[theta gamma psi_s0] vanishes");
            double v = 0.0;
            for (std::size_t k = 0; k < K; ++k)
                v += pop.weight(k) * (pack.psi.at(k, c, m) * z_aux.at(k, c, m) +
                                      pack.psi_s0.at(k, c, m) * z0_aux.at(k, c, m) +
                                      pack.phi1.at(k, c, m));
            const double wv = v / dg;
            for (std::size_t k = 0; k < K; ++k)
                z0_diff.at(k, c, m) = z0_aux.at(k, c, m) - tp[k].tg * wv;
        }
    return {std::move(z_diff), std::move(z0_diff)};
}

namespace {

struct InnerResult {
    Field y, z, z0;
};

// One backward Euler sweep: the base driver is evaluated at the sweep's own
// integrand extraction, the coupling driver at the frozen argument.
InnerResult inner_sweep(const ScenarioSet& scen, const PopulationSpec& pop, const NotationPack& pack,
                        const Field& coupling_frozen, const SolverConfig& cfg, bool deterministic) {
    const std::size_t K = coupling_frozen.n_types, C = coupling_frozen.n_common, M = scen.grid.steps;
    const double dt = scen.grid.dt();
    auto tp = type_params(pop);
    const double terminal_base = pop_log_x(pop);

    InnerResult r;
    r.y = Field(K, C, M + 1);
    r.z = Field(K, C, M);
    r.z0 = Field(K, C, M);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t c = 0; c < C; ++c) r.y.at(k, c, M) = -tp[k].tg * terminal_base;

    if (deterministic) {
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t m = M; m-- > 0;) {
                double f = j1_point(pack, tp[k], k, 0, m, 0.0, 0.0, true) + coupling_frozen.at(k, 0, m);
                r.y.at(k, 0, m) = r.y.at(k, 0, m + 1) + f * dt;
            }
        return r;
    }

    Regression reg{cfg.basis_degree};
    std::vector<double> w0m(C), vals(C), prod(C);
    for (std::size_t m = M; m-- > 0;) {
        const double tm = scen.grid.node(m);
        for (std::size_t c = 0; c < C; ++c) w0m[c] = scen.w0_at(c, m);
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t c = 0; c < C; ++c) {
                vals[c] = r.y.at(k, c, m + 1);
                prod[c] = vals[c] * scen.dw0(c, m) / dt;
            }
            auto cond = reg.fit(w0m, vals, tm);
            auto zfit = reg.fit(w0m, prod, tm);
            for (std::size_t c = 0; c < C; ++c) {
                double z0v = zfit[c];
                r.z0.at(k, c, m) = z0v;
                double f = j1_point(pack, tp[k], k, c, m, 0.0, z0v, true) + coupling_frozen.at(k, c, m);
                r.y.at(k, c, m) = cond[c] + f * dt;
            }
        }
    }
    return r;
}

double bmo_norm_sq(const ScenarioSet& scen, const Field& z, const Field& z0, const SolverConfig& cfg,
                   bool deterministic) {
    const std::size_t K = z.n_types, C = z.n_common, M = z.n_time;
    const double dt = scen.grid.dt();
    double best = 0.0;
    if (deterministic) {
        for (std::size_t k = 0; k < K; ++k) {
            double acc = 0.0;
            for (std::size_t m = M; m-- > 0;) {
                acc += (z.at(k, 0, m) * z.at(k, 0, m) + z0.at(k, 0, m) * z0.at(k, 0, m)) * dt;
                best = std::max(best, acc);
            }
        }
        return best;
    }
    Regression reg{cfg.basis_degree};
    std::vector<double> w0m(C), tail(C);
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> acc(C, 0.0);
        for (std::size_t m = M; m-- > 0;) {
            for (std::size_t c = 0; c < C; ++c)
                acc[c] += (z.at(k, c, m) * z.at(k, c, m) + z0.at(k, c, m) * z0.at(k, c, m)) * dt;
            for (std::size_t c = 0; c < C; ++c) {
                w0m[c] = scen.w0_at(c, m);
                tail[c] = acc[c];
            }
            auto cond = reg.fit(w0m, tail, scen.grid.node(m));
            for (double v : cond) best = std::max(best, v);
        }
    }
    return best;
}

} // namespace

BsdeSolution picard_solve(const ScenarioSet& scen, const PopulationSpec& pop, const BenchmarkSolution& benchmark,
                          const SolverConfig& cfg) {
    require(cfg.tol > 0.0 && cfg.max_iter >= 1, ErrorKind::InvalidArgument, "picard_solve: bad config");
    require(cfg.damping >= 0.0 && cfg.damping < 1.0, ErrorKind::InvalidArgument,
            "picard_solve: damping must lie in [0,1)");
    NotationPack pack = notation_pack(pop, benchmark);
    const std::size_t K = benchmark.coeffs.n_types, C = benchmark.coeffs.n_common, M = scen.grid.steps;
    const bool deterministic = (C == 1);
    const double dt = scen.grid.dt();
    auto tp = type_params(pop);

    BsdeSolution sol;
    sol.grid = scen.grid;
    sol.n_types = K;
    sol.n_common = C;

    Field z_hat(K, C, M), z0_hat(K, C, M), y_prev(K, C, M + 1);
    InnerResult res;
    bool converged = false;
    for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
        Field coupling = driver_coupling(pack, pop, benchmark, z_hat, z0_hat);
        res = inner_sweep(scen, pop, pack, coupling, cfg, deterministic);
        double delta = sup_abs_diff(res.z, z_hat) + sup_abs_diff(res.z0, z0_hat) +
                       sup_abs_diff(res.y, y_prev);
        sol.delta_history.push_back(delta);
        sol.iterations = it;
        if (cfg.damping > 0.0) {
            for (std::size_t i = 0; i < z_hat.v.size(); ++i) {
                z_hat.v[i] = (1.0 - cfg.damping) * res.z.v[i] + cfg.damping * z_hat.v[i];
                z0_hat.v[i] = (1.0 - cfg.damping) * res.z0.v[i] + cfg.damping * z0_hat.v[i];
            }
        } else {
            z_hat = res.z;
            z0_hat = res.z0;
        }
        y_prev = res.y;
        if (delta < cfg.tol) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        std::ostringstream os;
        os << "picard_solve: no convergence after " << cfg.max_iter << " iterations; deltas:";
        for (double d : sol.delta_history) os << ' ' << d;
        fail(ErrorKind::SolverDiverged, os.str());
    }

    sol.y_aux = res.y;
    sol.z_aux = res.z;
    sol.z0_aux = res.z0;
    auto [zd, z0d] = invert_transform(sol.z_aux, sol.z0_aux, pack, pop);
    sol.z_diff = std::move(zd);
    sol.z0_diff = std::move(z0d);

    // Self-consistency residual with the coupling driver evaluated at the
    // final integrands rather than the frozen argument.
    {
        Field coupling = driver_coupling(pack, pop, benchmark, sol.z_aux, sol.z0_aux);
        double resid = 0.0;
        if (deterministic) {
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t m = 0; m < M; ++m) {
                    double f = j1_point(pack, tp[k], k, 0, m, sol.z_aux.at(k, 0, m), sol.z0_aux.at(k, 0, m),
                                        true) +
                               coupling.at(k, 0, m);
                    resid = std::max(resid, std::abs(sol.y_aux.at(k, 0, m) - sol.y_aux.at(k, 0, m + 1) -
                                                     f * dt));
                }
        } else {
            Regression reg{cfg.basis_degree};
            std::vector<double> w0m(C), vals(C);
            for (std::size_t m = 0; m < M; ++m) {
                for (std::size_t c = 0; c < C; ++c) w0m[c] = scen.w0_at(c, m);
                for (std::size_t k = 0; k < K; ++k) {
                    for (std::size_t c = 0; c < C; ++c) vals[c] = sol.y_aux.at(k, c, m + 1);
                    auto cond = reg.fit(w0m, vals, scen.grid.node(m));
                    for (std::size_t c = 0; c < C; ++c) {
                        double f = j1_point(pack, tp[k], k, c, m, sol.z_aux.at(k, c, m),
                                            sol.z0_aux.at(k, c, m), true) +
                                   coupling.at(k, c, m);
                        resid = std::max(resid, std::abs(sol.y_aux.at(k, c, m) - cond[c] - f * dt));
                    }
                }
            }
        }
        sol.residual = resid;
    }

    double radius = ball_radius(pop);
    sol.z_norm_over_radius = std::sqrt(bmo_norm_sq(scen, sol.z_aux, sol.z0_aux, cfg, deterministic)) / radius;
    sol.outside_ball = sol.z_norm_over_radius > 1.0;
    return sol;
}

EquilibriumOutput reconstruct_equilibrium(const BsdeSolution& sol, const BenchmarkSolution& benchmark,
                                          const PopulationSpec& pop, const ScenarioSet& scen) {
    const std::size_t K = sol.n_types, C = sol.n_common, M = sol.grid.steps;
    const CoeffGrid& cg = benchmark.coeffs;
    auto tp = type_params(pop);

    EquilibriumOutput out;
    out.grid = sol.grid;
    out.n_types = K;
    out.n_common = C;
    out.z = Field(K, C, M);
    out.z0 = Field(K, C, M);
    out.pi_star = Field(K, C, M);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t m = 0; m < M; ++m) {
                double z = sol.z_diff.at(k, c, m) + benchmark.z.at(k, c, m);
                double z0 = sol.z0_diff.at(k, c, m) + benchmark.z0.at(k, c, m);
                out.z.at(k, c, m) = z;
                out.z0.at(k, c, m) = z0;
                out.pi_star.at(k, c, m) =
                    (cg.h.at(k, c, m) + cg.sigma.at(k, c, m) * z + cg.sigma0.at(k, c, m) * z0) /
                    (tp[k].one_m_gamma * cg.s2(k, c, m));
            }

    out.y0.resize(K);
    out.value.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        // Both summands are trivially measurable at t = 0; average over the
        // common axis to wash regression noise.
        double acc = 0.0;
        for (std::size_t c = 0; c < C; ++c) acc += benchmark.y.at(k, c, 0) + sol.y_aux.at(k, c, 0);
        out.y0[k] = acc / static_cast<double>(C);
        const AgentType& ty = pop.type(k);
        out.value[k] = std::pow(ty.x, ty.gamma) * std::exp(out.y0[k]) / ty.gamma;
    }

    StrategyField strat;
    strat.grid = sol.grid;
    if (C == 1) {
        strat.values = out.pi_star;
    } else {
        require(C == scen.n_common, ErrorKind::InvalidArgument,
                "reconstruct_equilibrium: scenario/solver common-path mismatch");
        strat.values = out.pi_star;
    }
    WealthPanel panel = simulate_log_wealth(scen, pop, strat);
    out.index = performance_index(panel, pop);
    return out;
}

WealthPanel girsanov_density(const PopulationSpec& pop, const BenchmarkSolution& benchmark,
                             const ScenarioSet& scen) {
    require(pop.n_types() == scen.n_types, ErrorKind::InvalidArgument, "girsanov_density: shape mismatch");
    const std::size_t K = scen.n_types, C = scen.n_common, P = scen.n_particles, M = scen.grid.steps;
    const double dt = scen.grid.dt();
    const std::size_t cc = benchmark.coeffs.n_common; // 1 in deterministic mode
    require(cc == 1 || cc == C, ErrorKind::InvalidArgument,
            "girsanov_density: scenario/benchmark common-path mismatch");

    WealthPanel dens;
    dens.grid = scen.grid;
    dens.n_types = K;
    dens.n_common = C;
    dens.n_particles = P;
    dens.logx.resize(K * C * P * (M + 1));

    parallel_for(K * C, [&](std::size_t kc) {
        const std::size_t k = kc / C, c = kc % C;
        const std::size_t cb = cc == 1 ? 0 : c;
        for (std::size_t p = 0; p < P; ++p) {
            double acc = 0.0;
            dens.at(k, c, p, 0) = 0.0;
            for (std::size_t m = 0; m < M; ++m) {
                double mw = benchmark.drift_w.at(k, cb, m), mw0 = benchmark.drift_w0.at(k, cb, m);
                acc += mw * scen.dw(k, c, p, m) + mw0 * scen.dw0(c, m) - 0.5 * (mw * mw + mw0 * mw0) * dt;
                require(std::isfinite(acc), ErrorKind::NumericalOverflow, "girsanov_density: overflow");
                dens.at(k, c, p, m + 1) = acc;
            }
        }
    });
    return dens;
}

} // namespace bsde
} // namespace mfpg
