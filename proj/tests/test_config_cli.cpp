#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "mfpg/config.hpp"
#include "mfpg/runner.hpp"

using namespace mfpg;
namespace fs = std::filesystem;

namespace {

std::string minimal_config(const std::string& kind, const std::string& outdir) {
    std::ostringstream os;
    os << R"({
  "kind": ")" << kind
       << R"(",
  "grid": {"horizon": 1.0, "steps": 16},
  "scenario": {"n_common": 8, "n_particles": 16, "seed": 11},
  "population": {"types": [
    {"weight": 1.0, "x": 1.0, "gamma": 0.5, "theta": 1.0,
     "coeffs": {"mode": "constant", "h": 0.1, "sigma": 0.2, "sigma0": 0.2}}
  ]},
  "output_dir": ")" << outdir
       << R"("
})";
    return os.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

bool has_issue_matching(const ParseResult& r, const std::string& needle) {
    for (const auto& i : r.issues)
        if ((i.path + " " + i.reason).find(needle) != std::string::npos) return true;
    return false;
}

} // namespace

TEST_CASE("config parsing") {
    SUBCASE("a minimal single-type config validates") {
        auto r = parse_config(minimal_config("solve-mfg", "/tmp/x"));
        REQUIRE(r.ok());
        CHECK(r.config->population.n_types() == 1);
        CHECK(r.config->grid.steps == 16);
        CHECK(r.config->seed == 11);
    }
    SUBCASE("weights that do not sum to one are rejected, naming the field") {
        std::string txt = minimal_config("solve-mfg", "/tmp/x");
        txt.replace(txt.find("\"weight\": 1.0"), 13, "\"weight\": 0.9");
        auto r = parse_config(txt);
        CHECK(!r.ok());
        CHECK(has_issue_matching(r, "weights"));
    }
    SUBCASE("out-of-range competition weight is rejected, citing the bound") {
        std::string txt = minimal_config("solve-mfg", "/tmp/x");
        txt.replace(txt.find("\"theta\": 1.0"), 12, "\"theta\": 1.5");
        auto r = parse_config(txt);
        CHECK(!r.ok());
        CHECK(has_issue_matching(r, "[0,1]"));
    }
    SUBCASE("unknown keys are rejected with their path") {
        std::string txt = minimal_config("solve-mfg", "/tmp/x");
        txt.insert(txt.find("\"grid\""), "\"grud\": 1, ");
        auto r = parse_config(txt);
        CHECK(!r.ok());
        CHECK(has_issue_matching(r, "grud"));
    }
    SUBCASE("parsing is total on garbage") {
        CHECK(!parse_config("{{{{").ok());
        CHECK(!parse_config("").ok());
        CHECK(!parse_config("[1,2,3]").ok());
        CHECK(!parse_config("{\"kind\": 3}").ok());
    }
    SUBCASE("gamma constraints are enforced at parse time") {
        std::string txt = minimal_config("solve-mfg", "/tmp/x");
        txt.replace(txt.find("\"gamma\": 0.5"), 12, "\"gamma\": 1.2");
        CHECK(!parse_config(txt).ok());
        std::string txt2 = minimal_config("solve-mfg", "/tmp/x");
        txt2.replace(txt2.find("\"gamma\": 0.5"), 12, "\"gamma\": 0.0");
        CHECK(!parse_config(txt2).ok());
    }
    SUBCASE("vanishing total volatility is rejected") {
        std::string txt = minimal_config("solve-mfg", "/tmp/x");
        const std::string from = "\"sigma\": 0.2, \"sigma0\": 0.2";
        txt.replace(txt.find(from), from.size(), "\"sigma\": 0.0, \"sigma0\": 0.0");
        auto r = parse_config(txt);
        CHECK(!r.ok());
        CHECK(has_issue_matching(r, "bounded away"));
    }
    SUBCASE("time-varying arrays must match the grid") {
        std::string txt = minimal_config("solve-mfg", "/tmp/x");
        txt.replace(txt.find(R"({"mode": "constant", "h": 0.1, "sigma": 0.2, "sigma0": 0.2})"), 59,
                    R"({"mode": "time_varying", "h": [0.1], "sigma": [0.2], "sigma0": [0.2]})");
        auto r = parse_config(txt);
        CHECK(!r.ok());
        CHECK(has_issue_matching(r, "grid.steps"));
    }
}

TEST_CASE("experiment runs write the advertised artifacts") {
    fs::path dir = fs::temp_directory_path() / "mfpg_test_run";
    fs::remove_all(dir);

    SUBCASE("solve-mfg emits the closed-form strategy table") {
        auto r = parse_config(minimal_config("solve-mfg", (dir / "mfg").string()));
        REQUIRE(r.ok());
        auto art = run_experiment(*r.config);
        CHECK(art.pass);
        std::string csv = slurp(dir / "mfg" / "strategy.csv");
        CHECK(csv.find("type_id,t,pi_star,Z0,Y0,V") == 0);
        CHECK(csv.find("1.666667") != std::string::npos);
        CHECK(fs::exists(dir / "mfg" / "run_manifest.json"));
    }
    SUBCASE("runs are byte-reproducible from the same config") {
        auto r1 = parse_config(minimal_config("solve-bsde", (dir / "a").string()));
        auto r2 = parse_config(minimal_config("solve-bsde", (dir / "b").string()));
        REQUIRE(r1.ok());
        REQUIRE(r2.ok());
        run_experiment(*r1.config);
        run_experiment(*r2.config);
        CHECK(slurp(dir / "a" / "bsde_diagnostics.csv") == slurp(dir / "b" / "bsde_diagnostics.csv"));
        CHECK(slurp(dir / "a" / "bsde_equilibrium.csv") == slurp(dir / "b" / "bsde_equilibrium.csv"));
        CHECK(!slurp(dir / "a" / "bsde_equilibrium.csv").empty());
    }
    SUBCASE("verify produces a verdict block") {
        std::string txt = minimal_config("verify", (dir / "v").string());
        txt.replace(txt.find("\"n_common\": 8"), 13, "\"n_common\": 32");
        txt.replace(txt.find("\"n_particles\": 16"), 17, "\"n_particles\": 128");
        auto r = parse_config(txt);
        REQUIRE(r.ok());
        auto art = run_experiment(*r.config);
        CHECK(art.pass);
        std::string verdict = slurp(dir / "v" / "audit_verdict.txt");
        CHECK(verdict.find("verdict: PASS") == 0);
    }
    SUBCASE("convergence emits a decreasing table") {
        std::string txt = R"({
  "kind": "convergence",
  "grid": {"horizon": 1.0, "steps": 4},
  "population": {"types": [
    {"weight": 0.5, "x": 1.0, "gamma": 0.5, "theta": 1.0,
     "coeffs": {"mode": "constant", "h": 0.1, "sigma": 0.2, "sigma0": 0.2}},
    {"weight": 0.5, "x": 1.0, "gamma": -1.0, "theta": 0.5,
     "coeffs": {"mode": "constant", "h": 0.05, "sigma": 0.3, "sigma0": 0.1}}
  ]},
  "convergence": {"n_list": [4, 16, 64], "n_seeds": 32},
  "output_dir": ")" + (dir / "c").string() +
                          R"("})";
        auto r = parse_config(txt);
        REQUIRE(r.ok());
        run_experiment(*r.config);
        std::string csv = slurp(dir / "c" / "convergence.csv");
        CHECK(csv.find("N,error") == 0);
        CHECK(csv.find("\n4,") != std::string::npos);
        CHECK(csv.find("\n64,") != std::string::npos);
    }
    SUBCASE("plot data: empty sweep writes a header-only file") {
        std::string txt = minimal_config("solve-mfg", (dir / "s").string());
        txt.insert(txt.find("\"output_dir\""), "\"theta_sweep\": [], ");
        auto r = parse_config(txt);
        REQUIRE(r.ok());
        run_experiment(*r.config);
        CHECK(slurp(dir / "s" / "theta_sweep.csv") == "theta,type_id,pi_star\n");
        std::string txt2 = minimal_config("solve-mfg", (dir / "s2").string());
        txt2.insert(txt2.find("\"output_dir\""), "\"theta_sweep\": [0, 0.25, 0.5, 0.75, 1.0], ");
        auto r2 = parse_config(txt2);
        REQUIRE(r2.ok());
        run_experiment(*r2.config);
        std::string csv = slurp(dir / "s2" / "theta_sweep.csv");
        CHECK(csv.find("theta,type_id,pi_star") == 0);
        CHECK(csv.find("2.500000") != std::string::npos);
        CHECK(csv.find("1.666667") != std::string::npos);
        // monotone decreasing sweep for a crowding-averse type
        std::vector<double> vals;
        std::istringstream is(csv);
        std::string line;
        std::getline(is, line);
        while (std::getline(is, line)) vals.push_back(std::stod(line.substr(line.rfind(',') + 1)));
        for (std::size_t i = 1; i < vals.size(); ++i) CHECK(vals[i] < vals[i - 1]);
    }
    SUBCASE("expand writes coefficient and remainder tables") {
        std::string txt = minimal_config("expand", (dir / "e").string());
        txt.insert(txt.find("\"output_dir\""),
                   "\"expand\": {\"order\": 2, \"theta_list\": [0.2, 0.1, 0.05, 0.025]}, ");
        auto r = parse_config(txt);
        REQUIRE(r.ok());
        run_experiment(*r.config);
        CHECK(slurp(dir / "e" / "expansion.csv").find("order,type_id,t,X_i,Y_i,Z_i,Z0_i") == 0);
        CHECK(slurp(dir / "e" / "remainder.csv").find("theta,abs_error,order") == 0);
    }
}

#ifdef MFPG_CLI_PATH
TEST_CASE("command-line interface") {
    fs::path dir = fs::temp_directory_path() / "mfpg_test_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto sh = [&](const std::string& cmd) { return std::system(cmd.c_str()) >> 8 & 0xff; };

    SUBCASE("solve-mfg succeeds and a schema violation maps to the parse exit code") {
        fs::path cfgp = dir / "ok.json";
        std::ofstream(cfgp) << minimal_config("solve-mfg", (dir / "out").string());
        CHECK(sh(std::string(MFPG_CLI_PATH) + " solve-mfg --config " + cfgp.string() + " >/dev/null") == 0);

        fs::path badp = dir / "bad.json";
        std::string bad = minimal_config("solve-mfg", (dir / "out2").string());
        bad.replace(bad.find("\"theta\": 1.0"), 12, "\"theta\": 1.5");
        std::ofstream(badp) << bad;
        CHECK(sh(std::string(MFPG_CLI_PATH) + " solve-mfg --config " + badp.string() + " 2>/dev/null") == 2);
    }
    SUBCASE("missing config maps to the io exit code") {
        CHECK(sh(std::string(MFPG_CLI_PATH) + " solve-mfg --config /nonexistent.json 2>/dev/null") == 6);
    }
    SUBCASE("a starved iteration budget maps to the solver exit code") {
        fs::path cfgp = dir / "starved.json";
        std::string txt = minimal_config("solve-bsde", (dir / "outs").string());
        txt.insert(txt.find("\"output_dir\""), "\"solver\": {\"max_iter\": 1}, ");
        std::ofstream(cfgp) << txt;
        CHECK(sh(std::string(MFPG_CLI_PATH) + " solve-bsde --config " + cfgp.string() + " 2>/dev/null") == 3);
    }
    SUBCASE("closed forms on path-dependent coefficients map to the invalid-argument exit code") {
        fs::path cfgp = dir / "markov_mfg.json";
        std::string txt = minimal_config("solve-mfg", (dir / "outm").string());
        txt.replace(txt.find(R"({"mode": "constant", "h": 0.1, "sigma": 0.2, "sigma0": 0.2})"), 59,
                    R"({"mode": "markov", "h": {"base": 0.1, "tanh_scale": 0.05},)"
                    R"( "sigma": {"base": 0.2, "tanh_scale": 0.0},)"
                    R"( "sigma0": {"base": 0.2, "tanh_scale": 0.0}})");
        std::ofstream(cfgp) << txt;
        CHECK(sh(std::string(MFPG_CLI_PATH) + " solve-mfg --config " + cfgp.string() + " 2>/dev/null") == 7);
    }
    SUBCASE("flag overrides land in the manifest") {
        fs::path cfgp = dir / "ovr.json";
        std::ofstream(cfgp) << minimal_config("solve-mfg", (dir / "out3").string());
        CHECK(sh(std::string(MFPG_CLI_PATH) + " solve-mfg --config " + cfgp.string() +
                 " --seed 99 --out " + (dir / "out4").string() + " >/dev/null") == 0);
        std::string manifest = slurp(dir / "out4" / "run_manifest.json");
        CHECK(manifest.find("\"seed\": 99") != std::string::npos);
    }
}
#endif
