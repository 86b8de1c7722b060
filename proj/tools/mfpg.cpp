#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfpg/runner.hpp"
#include "mfpg/version.hpp"

namespace {

struct CliOpts {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    long long order = -1;
    long long paths = -1;
    long long particles = -1;
    long long steps = -1;
};

void add_common(CLI::App* cmd, CliOpts& o) {
    cmd->add_option("--config", o.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--seed", o.seed, "master seed (overrides config)");
    cmd->add_option("--out", o.out_dir, "output directory (overrides config)");
    cmd->add_option("--order", o.order, "expansion order (expand)");
    cmd->add_option("--paths", o.paths, "common-noise path count (overrides config)");
    cmd->add_option("--particles", o.particles, "particles per (type, path) (overrides config)");
    cmd->add_option("--steps", o.steps, "time steps (overrides config)");
}

int exit_code(mfpg::ErrorKind k) {
    switch (k) {
        case mfpg::ErrorKind::ParseError: return 2;
        case mfpg::ErrorKind::SolverDiverged: return 3;
        case mfpg::ErrorKind::DegeneratePopulation:
        case mfpg::ErrorKind::DegenerateGame:
        case mfpg::ErrorKind::TransformationDegenerate: return 4;
        case mfpg::ErrorKind::NumericalOverflow: return 5;
        case mfpg::ErrorKind::IoError: return 6;
        case mfpg::ErrorKind::InvalidArgument: return 7;
    }
    return 1;
}

void print_failure(mfpg::ErrorKind kind, const std::string& message) {
    nlohmann::json rec;
    rec["error"] = mfpg::error_kind_name(kind);
    rec["message"] = message;
    std::cerr << rec.dump() << "\n";
}

int run(const std::string& kind, const CliOpts& o) {
    std::ifstream in(o.config_path, std::ios::binary);
    if (!in.good()) {
        print_failure(mfpg::ErrorKind::IoError, "cannot read config " + o.config_path);
        return exit_code(mfpg::ErrorKind::IoError);
    }
    std::ostringstream buf;
    buf << in.rdbuf();

    // The subcommand selects the pipeline; apply it and any flag overrides
    // to the config text before validation so the manifest reflects the
    // effective run.
    nlohmann::json j = nlohmann::json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) {
        print_failure(mfpg::ErrorKind::ParseError, "invalid JSON in " + o.config_path);
        return exit_code(mfpg::ErrorKind::ParseError);
    }
    if (j.is_object()) {
        if (!j.contains("kind")) j["kind"] = kind;
        if (j.contains("kind") && j["kind"] != kind) {
            print_failure(mfpg::ErrorKind::InvalidArgument,
                          "config kind does not match subcommand " + kind);
            return exit_code(mfpg::ErrorKind::InvalidArgument);
        }
        if (o.seed >= 0) j["scenario"]["seed"] = o.seed;
        if (o.paths >= 1) j["scenario"]["n_common"] = o.paths;
        if (o.particles >= 1) j["scenario"]["n_particles"] = o.particles;
        if (o.steps >= 1) j["grid"]["steps"] = o.steps;
        if (o.order >= 1) j["expand"]["order"] = o.order;
        if (!o.out_dir.empty()) j["output_dir"] = o.out_dir;
    }

    mfpg::ParseResult pr = mfpg::parse_config(j.dump());
    if (!pr.ok()) {
        for (const auto& issue : pr.issues) std::cerr << issue.path << ": " << issue.reason << "\n";
        print_failure(mfpg::ErrorKind::ParseError, "config validation failed with " +
                                                       std::to_string(pr.issues.size()) + " issue(s)");
        return exit_code(mfpg::ErrorKind::ParseError);
    }

    try {
        mfpg::RunArtifacts art = mfpg::run_experiment(*pr.config);
        std::cout << art.summary << "\n";
        std::cout << "outputs in " << pr.config->output_dir << ":";
        for (const auto& f : art.files) std::cout << ' ' << f;
        std::cout << "\n";
        return art.pass ? 0 : 8;
    } catch (const mfpg::Error& e) {
        print_failure(e.kind(), e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        print_failure(mfpg::ErrorKind::InvalidArgument, e.what());
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mean-field and N-player portfolio game engine"};
    app.set_version_flag("--version", MFPG_VERSION);
    app.require_subcommand(1);

    static const char* kinds[] = {"solve-mfg", "solve-nplayer", "solve-bsde", "expand", "verify", "convergence"};
    static const char* blurbs[] = {
        "closed-form equilibrium (type-measurable coefficients)",
        "finite-game closed-form strategies",
        "quadratic BSDE solver with fixed-point iteration",
        "competition-parameter expansion coefficients",
        "equilibrium audit: fixed point, optimality, deviations",
        "finite-game to mean-field convergence study",
    };
    CliOpts opts[6];
    for (int i = 0; i < 6; ++i) add_common(app.add_subcommand(kinds[i], blurbs[i]), opts[i]);

    CLI11_PARSE(app, argc, argv);

    for (int i = 0; i < 6; ++i)
        if (app.get_subcommand(kinds[i])->parsed()) return run(kinds[i], opts[i]);
    return 1;
}
