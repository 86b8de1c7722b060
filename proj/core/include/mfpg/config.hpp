#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfpg/bsde.hpp"
#include "mfpg/types.hpp"

namespace mfpg {

struct ExperimentConfig {
    std::string kind; // solve-mfg | solve-nplayer | solve-bsde | expand | verify | convergence
    TimeGrid grid{1.0, 64};
    std::size_t n_common = 16, n_particles = 64;
    std::uint64_t seed = 1;
    PopulationSpec population;
    bsde::SolverConfig solver;
    std::vector<PlayerSpec> players;          // solve-nplayer
    std::vector<std::size_t> n_list;          // convergence
    std::size_t n_seeds = 64;                 // convergence
    std::size_t order = 1;                    // expand
    std::vector<double> theta_list;           // expand remainder curve
    std::optional<std::vector<double>> theta_sweep; // solve-mfg sweep output
    std::string output_dir = "out";
    nlohmann::json raw; // normalized config, embedded in the manifest
};

struct ParseIssue {
    std::string path;
    std::string reason;
};

struct ParseResult {
    std::optional<ExperimentConfig> config;
    std::vector<ParseIssue> issues;
    bool ok() const { return config.has_value() && issues.empty(); }
};

// Total: returns issues instead of throwing on malformed input.
ParseResult parse_config(const std::string& text);

} // namespace mfpg
