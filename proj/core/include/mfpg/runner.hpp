#pragma once

#include <string>
#include <vector>

#include "mfpg/config.hpp"

namespace mfpg {

struct RunArtifacts {
    std::vector<std::string> files; // relative to output dir
    bool pass = true;               // verify verdict (true for other kinds)
    std::string summary;            // printed to stdout by the CLI
};

// Executes one experiment, writes its CSV outputs and run manifest under
// cfg.output_dir. Throws mfpg::Error on failure.
RunArtifacts run_experiment(const ExperimentConfig& cfg);

} // namespace mfpg
