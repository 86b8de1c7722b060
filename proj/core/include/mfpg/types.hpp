#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mfpg/errors.hpp"

namespace mfpg {

// Uniform discretization of [0, T].
struct TimeGrid {
    double horizon = 1.0;   // T, in years
    std::size_t steps = 1;  // M cells, M+1 nodes

    TimeGrid() = default;
    TimeGrid(double T, std::size_t M) : horizon(T), steps(M) {
        require(T > 0.0 && std::isfinite(T), ErrorKind::InvalidArgument, "TimeGrid: horizon must be positive");
        require(M >= 1, ErrorKind::InvalidArgument, "TimeGrid: steps must be >= 1");
    }

    double dt() const { return horizon / static_cast<double>(steps); }
    double node(std::size_t m) const { return dt() * static_cast<double>(m); }
    std::size_t n_nodes() const { return steps + 1; }

    bool operator==(const TimeGrid& o) const { return horizon == o.horizon && steps == o.steps; }
};

enum class CoeffMode { Constant, TimeVarying, CommonNoiseMarkov };

// A market coefficient triple (h, sigma, sigma0). Constant mode stores
// scalars; TimeVarying stores one value per grid cell (left-point
// evaluated); CommonNoiseMarkov stores evaluators of (t, w0) clamped to a
// declared bounded range.
struct CoefficientModel {
    struct MarkovFn {
        std::function<double(double, double)> eval; // (t, w0) -> value
        double lo = 0.0, hi = 0.0;                  // declared bounds

        double operator()(double t, double w0) const {
            double v = eval(t, w0);
            return std::clamp(v, lo, hi);
        }
    };

    CoeffMode mode = CoeffMode::Constant;

    // Constant mode
    double h = 0.0, sigma = 0.0, sigma0 = 0.0;

    // TimeVarying mode: one value per grid cell
    std::vector<double> h_cells, sigma_cells, sigma0_cells;

    // CommonNoiseMarkov mode
    MarkovFn h_fn, sigma_fn, sigma0_fn;

    static CoefficientModel constant(double h_, double sigma_, double sigma0_) {
        CoefficientModel cm;
        cm.mode = CoeffMode::Constant;
        cm.h = h_;
        cm.sigma = sigma_;
        cm.sigma0 = sigma0_;
        cm.validate_constant();
        return cm;
    }

    static CoefficientModel time_varying(std::vector<double> h_, std::vector<double> sigma_,
                                         std::vector<double> sigma0_) {
        CoefficientModel cm;
        cm.mode = CoeffMode::TimeVarying;
        cm.h_cells = std::move(h_);
        cm.sigma_cells = std::move(sigma_);
        cm.sigma0_cells = std::move(sigma0_);
        require(!cm.h_cells.empty() && cm.h_cells.size() == cm.sigma_cells.size() &&
                    cm.h_cells.size() == cm.sigma0_cells.size(),
                ErrorKind::InvalidArgument, "CoefficientModel: cell arrays must be same nonzero length");
        for (std::size_t i = 0; i < cm.h_cells.size(); ++i) {
            require(std::isfinite(cm.h_cells[i]) && std::isfinite(cm.sigma_cells[i]) &&
                        std::isfinite(cm.sigma0_cells[i]),
                    ErrorKind::InvalidArgument, "CoefficientModel: non-finite cell value");
            require(cm.sigma_cells[i] * cm.sigma_cells[i] + cm.sigma0_cells[i] * cm.sigma0_cells[i] >= kMinVol2,
                    ErrorKind::InvalidArgument, "CoefficientModel: sigma^2+sigma0^2 bounded away from 0");
        }
        return cm;
    }

    static CoefficientModel markov(MarkovFn h_, MarkovFn sigma_, MarkovFn sigma0_) {
        CoefficientModel cm;
        cm.mode = CoeffMode::CommonNoiseMarkov;
        cm.h_fn = std::move(h_);
        cm.sigma_fn = std::move(sigma_);
        cm.sigma0_fn = std::move(sigma0_);
        require(cm.h_fn.eval && cm.sigma_fn.eval && cm.sigma0_fn.eval, ErrorKind::InvalidArgument,
                "CoefficientModel: missing evaluator");
        require(cm.h_fn.lo <= cm.h_fn.hi && cm.sigma_fn.lo <= cm.sigma_fn.hi && cm.sigma0_fn.lo <= cm.sigma0_fn.hi,
                ErrorKind::InvalidArgument, "CoefficientModel: invalid declared range");
        // worst-case volatility over the declared ranges
        double s_min = std::min(std::abs(cm.sigma_fn.lo), std::abs(cm.sigma_fn.hi));
        if (cm.sigma_fn.lo < 0.0 && cm.sigma_fn.hi > 0.0) s_min = 0.0;
        double s0_min = std::min(std::abs(cm.sigma0_fn.lo), std::abs(cm.sigma0_fn.hi));
        if (cm.sigma0_fn.lo < 0.0 && cm.sigma0_fn.hi > 0.0) s0_min = 0.0;
        require(s_min * s_min + s0_min * s0_min >= kMinVol2, ErrorKind::InvalidArgument,
                "CoefficientModel: declared ranges allow degenerate volatility");
        return cm;
    }

    bool deterministic() const { return mode != CoeffMode::CommonNoiseMarkov; }

    // Cell-left evaluation; w0 is the common-noise level at the cell-left node.
    double h_at(std::size_t cell, double t, double w0) const {
        switch (mode) {
            case CoeffMode::Constant: return h;
            case CoeffMode::TimeVarying: return h_cells[cell];
            case CoeffMode::CommonNoiseMarkov: return h_fn(t, w0);
        }
        return 0.0;
    }
    double sigma_at(std::size_t cell, double t, double w0) const {
        switch (mode) {
            case CoeffMode::Constant: return sigma;
            case CoeffMode::TimeVarying: return sigma_cells[cell];
            case CoeffMode::CommonNoiseMarkov: return sigma_fn(t, w0);
        }
        return 0.0;
    }
    double sigma0_at(std::size_t cell, double t, double w0) const {
        switch (mode) {
            case CoeffMode::Constant: return sigma0;
            case CoeffMode::TimeVarying: return sigma0_cells[cell];
            case CoeffMode::CommonNoiseMarkov: return sigma0_fn(t, w0);
        }
        return 0.0;
    }

    static constexpr double kMinVol2 = 1e-12;

  private:
    void validate_constant() const {
        require(std::isfinite(h) && std::isfinite(sigma) && std::isfinite(sigma0), ErrorKind::InvalidArgument,
                "CoefficientModel: non-finite value");
        require(sigma * sigma + sigma0 * sigma0 >= kMinVol2, ErrorKind::InvalidArgument,
                "CoefficientModel: sigma^2+sigma0^2 bounded away from 0");
    }
};

// One population type: initial wealth, CRRA exponent, competition weight
// and its market coefficients.
struct AgentType {
    double x = 1.0;      // initial wealth, > 0
    double gamma = 0.5;  // risk aversion, in (-inf,1)\{0}
    double theta = 0.0;  // competition parameter, in [0,1]
    CoefficientModel coeffs;

    static constexpr double kMinGamma = 1e-10;

    void validate() const {
        require(x > 0.0 && std::isfinite(x), ErrorKind::InvalidArgument, "AgentType: x must be > 0");
        require(std::isfinite(gamma) && gamma < 1.0 && std::abs(gamma) >= kMinGamma, ErrorKind::InvalidArgument,
                "AgentType: gamma must lie in (-inf,1) and away from 0");
        require(theta >= 0.0 && theta <= 1.0, ErrorKind::InvalidArgument, "AgentType: theta must lie in [0,1]");
    }
};

// Finite discrete mixture of types; weights sum to one.
struct PopulationSpec {
    struct Entry {
        double weight;
        AgentType type;
    };
    std::vector<Entry> entries;

    void validate() const {
        require(!entries.empty(), ErrorKind::InvalidArgument, "PopulationSpec: at least one type required");
        double sum = 0.0;
        for (const auto& e : entries) {
            require(e.weight > 0.0 && std::isfinite(e.weight), ErrorKind::InvalidArgument,
                    "PopulationSpec: weights must be positive");
            e.type.validate();
            sum += e.weight;
        }
        require(std::abs(sum - 1.0) <= 1e-12, ErrorKind::InvalidArgument,
                "PopulationSpec: weights must sum to 1 within 1e-12");
    }

    std::size_t n_types() const { return entries.size(); }
    const AgentType& type(std::size_t k) const { return entries[k].type; }
    double weight(std::size_t k) const { return entries[k].weight; }

    bool deterministic_coeffs() const {
        for (const auto& e : entries)
            if (!e.type.coeffs.deterministic()) return false;
        return true;
    }

    // Weighted sum over types of a per-type value.
    template <class F>
    double mean_over_types(F&& f) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < entries.size(); ++k) acc += entries[k].weight * f(k, entries[k].type);
        return acc;
    }

    static PopulationSpec single(const AgentType& t) {
        PopulationSpec p;
        p.entries.push_back({1.0, t});
        p.validate();
        return p;
    }
};

// Player in the finite game; same fields as AgentType.
using PlayerSpec = AgentType;

} // namespace mfpg
