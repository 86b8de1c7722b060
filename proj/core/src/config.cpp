#include "mfpg/config.hpp"

#include <cmath>
#include <set>

namespace mfpg {

namespace {

using nlohmann::json;

struct Ctx {
    std::vector<ParseIssue>& issues;
    void err(const std::string& path, const std::string& reason) { issues.push_back({path, reason}); }
};

bool check_keys(Ctx& ctx, const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) {
        ctx.err(path, "expected an object");
        return false;
    }
    bool ok = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            ctx.err(path + "." + it.key(), "unknown key");
            ok = false;
        }
    }
    return ok;
}

std::optional<double> get_num(Ctx& ctx, const json& j, const std::string& path, const char* key,
                              bool required, double fallback = 0.0) {
    if (!j.contains(key)) {
        if (required) {
            ctx.err(path + "." + key, "missing required field");
            return std::nullopt;
        }
        return fallback;
    }
    if (!j[key].is_number()) {
        ctx.err(path + "." + key, "expected a number");
        return std::nullopt;
    }
    return j[key].get<double>();
}

std::optional<std::vector<double>> get_num_array(Ctx& ctx, const json& j, const std::string& path) {
    if (!j.is_array()) {
        ctx.err(path, "expected an array of numbers");
        return std::nullopt;
    }
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) {
            ctx.err(path, "expected numbers only");
            return std::nullopt;
        }
        out.push_back(v.get<double>());
    }
    return out;
}

std::optional<CoefficientModel> parse_coeffs(Ctx& ctx, const json& j, const std::string& path,
                                             std::size_t steps) {
    if (!j.is_object()) {
        ctx.err(path, "expected an object");
        return std::nullopt;
    }
    std::string mode = j.value("mode", "constant");
    try {
        if (mode == "constant") {
            if (!check_keys(ctx, j, path, {"mode", "h", "sigma", "sigma0"})) return std::nullopt;
            auto h = get_num(ctx, j, path, "h", true);
            auto s = get_num(ctx, j, path, "sigma", true);
            auto s0 = get_num(ctx, j, path, "sigma0", true);
            if (!h || !s || !s0) return std::nullopt;
            return CoefficientModel::constant(*h, *s, *s0);
        }
        if (mode == "time_varying") {
            if (!check_keys(ctx, j, path, {"mode", "h", "sigma", "sigma0"})) return std::nullopt;
            auto h = j.contains("h") ? get_num_array(ctx, j["h"], path + ".h") : std::nullopt;
            auto s = j.contains("sigma") ? get_num_array(ctx, j["sigma"], path + ".sigma") : std::nullopt;
            auto s0 = j.contains("sigma0") ? get_num_array(ctx, j["sigma0"], path + ".sigma0") : std::nullopt;
            if (!h || !s || !s0) return std::nullopt;
            if (h->size() != steps || s->size() != steps || s0->size() != steps) {
                ctx.err(path, "cell arrays must have exactly grid.steps entries");
                return std::nullopt;
            }
            return CoefficientModel::time_varying(*h, *s, *s0);
        }
        if (mode == "markov") {
            if (!check_keys(ctx, j, path, {"mode", "h", "sigma", "sigma0"})) return std::nullopt;
            auto one = [&](const char* key) -> std::optional<CoefficientModel::MarkovFn> {
                std::string p = path + "." + key;
                if (!j.contains(key) || !j[key].is_object()) {
                    ctx.err(p, "expected an object {base, tanh_scale}");
                    return std::nullopt;
                }
                if (!check_keys(ctx, j[key], p, {"base", "tanh_scale"})) return std::nullopt;
                auto base = get_num(ctx, j[key], p, "base", true);
                auto sc = get_num(ctx, j[key], p, "tanh_scale", false, 0.0);
                if (!base || !sc) return std::nullopt;
                CoefficientModel::MarkovFn fn;
                double b = *base, s = *sc;
                fn.eval = [b, s](double, double w0) { return b + s * std::tanh(w0); };
                fn.lo = b - std::abs(s);
                fn.hi = b + std::abs(s);
                return fn;
            };
            auto h = one("h");
            auto s = one("sigma");
            auto s0 = one("sigma0");
            if (!h || !s || !s0) return std::nullopt;
            return CoefficientModel::markov(*h, *s, *s0);
        }
        ctx.err(path + ".mode", "must be one of constant, time_varying, markov");
        return std::nullopt;
    } catch (const Error& e) {
        ctx.err(path, e.what());
        return std::nullopt;
    }
}

std::optional<AgentType> parse_type(Ctx& ctx, const json& j, const std::string& path, std::size_t steps) {
    if (!check_keys(ctx, j, path, {"weight", "x", "gamma", "theta", "coeffs"})) return std::nullopt;
    auto x = get_num(ctx, j, path, "x", true);
    auto gamma = get_num(ctx, j, path, "gamma", true);
    auto theta = get_num(ctx, j, path, "theta", true);
    if (!j.contains("coeffs")) {
        ctx.err(path + ".coeffs", "missing required field");
        return std::nullopt;
    }
    auto cm = parse_coeffs(ctx, j["coeffs"], path + ".coeffs", steps);
    if (!x || !gamma || !theta || !cm) return std::nullopt;

    AgentType ty;
    ty.x = *x;
    ty.gamma = *gamma;
    ty.theta = *theta;
    ty.coeffs = *cm;
    try {
        ty.validate();
    } catch (const Error& e) {
        ctx.err(path, e.what());
        return std::nullopt;
    }
    return ty;
}

} // namespace

ParseResult parse_config(const std::string& text) {
    ParseResult result;
    Ctx ctx{result.issues};

    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        ctx.err("$", "invalid JSON");
        return result;
    }

    static const std::set<std::string> top_keys = {"kind",    "grid",   "scenario", "population",
                                                   "solver",  "players", "convergence", "expand",
                                                   "theta_sweep", "output_dir"};
    if (!check_keys(ctx, j, "$", top_keys)) return result;

    ExperimentConfig cfg;

    if (!j.contains("kind") || !j["kind"].is_string()) {
        ctx.err("$.kind", "missing or non-string experiment kind");
    } else {
        cfg.kind = j["kind"].get<std::string>();
        static const std::set<std::string> kinds = {"solve-mfg", "solve-nplayer", "solve-bsde",
                                                    "expand",    "verify",        "convergence"};
        if (!kinds.count(cfg.kind)) ctx.err("$.kind", "unknown experiment kind '" + cfg.kind + "'");
    }

    if (j.contains("grid")) {
        const json& g = j["grid"];
        if (check_keys(ctx, g, "$.grid", {"horizon", "steps"})) {
            auto T = get_num(ctx, g, "$.grid", "horizon", true);
            auto M = get_num(ctx, g, "$.grid", "steps", true);
            if (T && M) {
                if (*M < 1 || *M != std::floor(*M)) {
                    ctx.err("$.grid.steps", "must be a positive integer");
                } else {
                    try {
                        cfg.grid = TimeGrid(*T, static_cast<std::size_t>(*M));
                    } catch (const Error& e) {
                        ctx.err("$.grid", e.what());
                    }
                }
            }
        }
    } else {
        ctx.err("$.grid", "missing required field");
    }

    if (j.contains("scenario")) {
        const json& s = j["scenario"];
        if (check_keys(ctx, s, "$.scenario", {"n_common", "n_particles", "seed"})) {
            auto nc = get_num(ctx, s, "$.scenario", "n_common", false, 16.0);
            auto np = get_num(ctx, s, "$.scenario", "n_particles", false, 64.0);
            auto sd = get_num(ctx, s, "$.scenario", "seed", false, 1.0);
            if (nc && *nc >= 1) cfg.n_common = static_cast<std::size_t>(*nc);
            else if (nc) ctx.err("$.scenario.n_common", "must be >= 1");
            if (np && *np >= 1) cfg.n_particles = static_cast<std::size_t>(*np);
            else if (np) ctx.err("$.scenario.n_particles", "must be >= 1");
            if (sd) cfg.seed = static_cast<std::uint64_t>(*sd);
        }
    }

    if (j.contains("population")) {
        const json& p = j["population"];
        if (check_keys(ctx, p, "$.population", {"types"})) {
            if (!p.contains("types") || !p["types"].is_array() || p["types"].empty()) {
                ctx.err("$.population.types", "expected a nonempty array");
            } else {
                double wsum = 0.0;
                std::size_t i = 0;
                for (const auto& tj : p["types"]) {
                    std::string path = "$.population.types[" + std::to_string(i) + "]";
                    auto w = get_num(ctx, tj, path, "weight", true);
                    auto ty = parse_type(ctx, tj, path, cfg.grid.steps);
                    if (w && ty) {
                        if (*w <= 0.0) {
                            ctx.err(path + ".weight", "weights must be positive");
                        } else {
                            cfg.population.entries.push_back({*w, *ty});
                            wsum += *w;
                        }
                    }
                    ++i;
                }
                if (result.issues.empty() && std::abs(wsum - 1.0) > 1e-12)
                    ctx.err("$.population.types", "weights must sum to 1 within 1e-12 (got " +
                                                      std::to_string(wsum) + ")");
            }
        }
    } else {
        ctx.err("$.population", "missing required field");
    }

    if (j.contains("solver")) {
        const json& s = j["solver"];
        if (check_keys(ctx, s, "$.solver", {"tol", "max_iter", "basis_degree", "damping"})) {
            auto tol = get_num(ctx, s, "$.solver", "tol", false, cfg.solver.tol);
            auto mi = get_num(ctx, s, "$.solver", "max_iter", false, double(cfg.solver.max_iter));
            auto bd = get_num(ctx, s, "$.solver", "basis_degree", false, double(cfg.solver.basis_degree));
            auto dp = get_num(ctx, s, "$.solver", "damping", false, cfg.solver.damping);
            if (tol) {
                if (*tol <= 0.0) ctx.err("$.solver.tol", "must be > 0");
                else cfg.solver.tol = *tol;
            }
            if (mi) {
                if (*mi < 1) ctx.err("$.solver.max_iter", "must be >= 1");
                else cfg.solver.max_iter = static_cast<std::size_t>(*mi);
            }
            if (bd) {
                if (*bd < 0 || *bd > 6) ctx.err("$.solver.basis_degree", "must lie in [0,6]");
                else cfg.solver.basis_degree = static_cast<std::size_t>(*bd);
            }
            if (dp) {
                if (*dp < 0.0 || *dp >= 1.0) ctx.err("$.solver.damping", "must lie in [0,1)");
                else cfg.solver.damping = *dp;
            }
        }
    }

    if (j.contains("players")) {
        if (!j["players"].is_array() || j["players"].size() < 2) {
            ctx.err("$.players", "expected an array of at least 2 players");
        } else {
            std::size_t i = 0;
            for (const auto& pj : j["players"]) {
                std::string path = "$.players[" + std::to_string(i) + "]";
                json pc = pj;
                pc["weight"] = 1.0; // placeholder; players carry no weight
                auto ty = parse_type(ctx, pc, path, cfg.grid.steps);
                if (ty) cfg.players.push_back(*ty);
                ++i;
            }
        }
    }

    if (j.contains("convergence")) {
        const json& c = j["convergence"];
        if (check_keys(ctx, c, "$.convergence", {"n_list", "n_seeds"})) {
            if (c.contains("n_list")) {
                auto nl = get_num_array(ctx, c["n_list"], "$.convergence.n_list");
                if (nl) {
                    for (double v : *nl) {
                        if (v < 2 || v != std::floor(v)) {
                            ctx.err("$.convergence.n_list", "entries must be integers >= 2");
                            break;
                        }
                        cfg.n_list.push_back(static_cast<std::size_t>(v));
                    }
                }
            }
            auto ns = get_num(ctx, c, "$.convergence", "n_seeds", false, 64.0);
            if (ns && *ns >= 1) cfg.n_seeds = static_cast<std::size_t>(*ns);
        }
    }

    if (j.contains("expand")) {
        const json& e = j["expand"];
        if (check_keys(ctx, e, "$.expand", {"order", "theta_list"})) {
            auto od = get_num(ctx, e, "$.expand", "order", false, 1.0);
            if (od) {
                if (*od < 1 || *od != std::floor(*od)) ctx.err("$.expand.order", "must be a positive integer");
                else cfg.order = static_cast<std::size_t>(*od);
            }
            if (e.contains("theta_list")) {
                auto tl = get_num_array(ctx, e["theta_list"], "$.expand.theta_list");
                if (tl) cfg.theta_list = *tl;
            }
        }
    }

    if (j.contains("theta_sweep")) {
        auto ts = get_num_array(ctx, j["theta_sweep"], "$.theta_sweep");
        if (ts) cfg.theta_sweep = *ts;
    }

    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string()) ctx.err("$.output_dir", "expected a string");
        else cfg.output_dir = j["output_dir"].get<std::string>();
    }

    if (!result.issues.empty()) return result;

    try {
        cfg.population.validate();
    } catch (const Error& e) {
        ctx.err("$.population", e.what());
        return result;
    }
    if (cfg.kind == "solve-nplayer" && cfg.players.size() < 2)
        ctx.err("$.players", "solve-nplayer requires a players array (N >= 2)");
    if (cfg.kind == "convergence" && cfg.n_list.empty())
        ctx.err("$.convergence.n_list", "convergence requires a nonempty n_list");

    if (!result.issues.empty()) return result;

    cfg.raw = j;
    result.config = std::move(cfg);
    return result;
}

} // namespace mfpg
