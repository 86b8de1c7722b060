#pragma once

#include "mfpg/types.hpp"

namespace testpop {

// Single-type benchmark case used throughout: x=1, gamma=0.5, theta=1,
// h=0.1, sigma=0.2, sigma0=0.2, T=1.
inline mfpg::AgentType tau1(double theta = 1.0) {
    mfpg::AgentType ty;
    ty.x = 1.0;
    ty.gamma = 0.5;
    ty.theta = theta;
    ty.coeffs = mfpg::CoefficientModel::constant(0.1, 0.2, 0.2);
    return ty;
}

// Second mixture component: gamma=-1, theta=0.5, h=0.05, sigma=0.3, sigma0=0.1.
inline mfpg::AgentType tau2() {
    mfpg::AgentType ty;
    ty.x = 1.0;
    ty.gamma = -1.0;
    ty.theta = 0.5;
    ty.coeffs = mfpg::CoefficientModel::constant(0.05, 0.3, 0.1);
    return ty;
}

inline mfpg::PopulationSpec single_tau1(double theta = 1.0) {
    return mfpg::PopulationSpec::single(tau1(theta));
}

inline mfpg::PopulationSpec mixture() {
    mfpg::PopulationSpec pop;
    pop.entries.push_back({0.5, tau1()});
    pop.entries.push_back({0.5, tau2()});
    pop.validate();
    return pop;
}

inline mfpg::AgentType markov_tanh(double theta, double h_base = 0.1, double h_scale = 0.05) {
    mfpg::AgentType ty;
    ty.x = 1.0;
    ty.gamma = 0.5;
    ty.theta = theta;
    mfpg::CoefficientModel::MarkovFn h, s, s0;
    h.eval = [h_base, h_scale](double, double w0) { return h_base + h_scale * std::tanh(w0); };
    h.lo = h_base - std::abs(h_scale);
    h.hi = h_base + std::abs(h_scale);
    s.eval = [](double, double) { return 0.2; };
    s.lo = s.hi = 0.2;
    s0.eval = [](double, double) { return 0.2; };
    s0.lo = s0.hi = 0.2;
    ty.coeffs = mfpg::CoefficientModel::markov(h, s, s0);
    return ty;
}

} // namespace testpop
