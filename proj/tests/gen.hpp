#pragma once

// Hand-rolled generators for the property tests. Every generator is a pure function of
// the engine state, so a failing case can be replayed from the printed seed.

#include <cmath>
#include <cstdint>
#include <random>

#include "shellldp/noise.hpp"
#include "shellldp/spectral.hpp"

namespace gen {

using Engine = std::mt19937_64;

inline double uniform(Engine& e, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(e); }

inline double log_uniform(Engine& e, double lo, double hi) { return std::exp(uniform(e, std::log(lo), std::log(hi))); }

/// Complex Gaussian state with a random amplitude and spectral slope.
inline shellldp::ShellState state(Engine& e, const shellldp::ShellModel& model)
{
    std::normal_distribution<double> g;
    const double amp = log_uniform(e, 1e-3, 1e2);
    const double slope = uniform(e, 0.0, 1.5);
    shellldp::ShellState u(model.dim());
    for (int n = 1; n <= model.m(); ++n) u(n) = amp * shellldp::cplx(g(e), g(e)) * std::pow(model.k(n), -slope);
    return u;
}

inline shellldp::RkhsVector rkhs(Engine& e, std::size_t m, double scale = 1.0)
{
    std::normal_distribution<double> g;
    shellldp::RkhsVector h(m);
    for (std::size_t j = 0; j < m; ++j) h[j] = scale * shellldp::cplx(g(e), g(e));
    return h;
}

inline shellldp::ModelParams model_params(Engine& e, int m)
{
    shellldp::ModelParams p;
    p.variant = uniform(e, 0, 1) < 0.5 ? shellldp::Variant::GOY : shellldp::Variant::Sabra;
    p.a = uniform(e, -2, 2);
    p.b = uniform(e, -2, 2);
    p.mu = uniform(e, 1.2, 3.0);
    p.k0 = log_uniform(e, 0.1, 2.0);
    p.m = m;
    return p;
}

inline shellldp::CovarianceSpec covariance(Engine& e, std::size_t m)
{
    shellldp::CovarianceSpec c;
    for (std::size_t j = 0; j < m; ++j) c.q.push_back(log_uniform(e, 1e-4, 1.0));
    return c;
}

} // namespace gen
