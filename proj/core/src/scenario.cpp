#include "mfpg/scenario.hpp"

#include <cmath>

#include "mfpg/parallel.hpp"
#include "mfpg/rng.hpp"

namespace mfpg {

namespace {
// Stream tags keep the common and idiosyncratic draws disjoint.
constexpr std::uint64_t kTagCommon = 0xC0;
constexpr std::uint64_t kTagIdio = 0x1D;
} // namespace

ScenarioSet build_scenarios(const PopulationSpec& pop, const TimeGrid& grid, std::size_t n_common,
                            std::size_t n_particles, std::uint64_t seed) {
    pop.validate();
    require(n_common >= 1 && n_particles >= 1, ErrorKind::InvalidArgument,
            "build_scenarios: counts must be >= 1");

    ScenarioSet s;
    s.grid = grid;
    s.n_types = pop.n_types();
    s.n_common = n_common;
    s.n_particles = n_particles;
    s.master_seed = seed;

    const std::size_t M = grid.steps;
    const double sdt = std::sqrt(grid.dt());

    s.dW0.resize(n_common * M);
    s.w0_nodes.resize(n_common * (M + 1));
    parallel_for(n_common, [&](std::size_t c) {
        double w = 0.0;
        s.w0_nodes[c * (M + 1)] = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            double z = rng::normal_from(rng::mix(seed, kTagCommon, c, m));
            s.dW0[c * M + m] = sdt * z;
            w += sdt * z;
            s.w0_nodes[c * (M + 1) + m + 1] = w;
        }
    });

    s.dW.resize(s.n_types * n_common * n_particles * M);
    parallel_for(s.n_types * n_common, [&](std::size_t kc) {
        std::size_t k = kc / n_common, c = kc % n_common;
        for (std::size_t p = 0; p < n_particles; ++p) {
            double* row = s.dW.data() + ((k * n_common + c) * n_particles + p) * M;
            for (std::size_t m = 0; m < M; ++m)
                row[m] = sdt * rng::normal_from(rng::mix(seed, kTagIdio, k, c, p, m));
        }
    });
    return s;
}

} // namespace mfpg
