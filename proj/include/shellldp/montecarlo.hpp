#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "shellldp/dynamics.hpp"
#include "shellldp/errors.hpp"
#include "shellldp/noise.hpp"
#include "shellldp/parallel.hpp"
#include "shellldp/rate.hpp"

namespace shellldp {

struct McConfig {
    std::size_t n_paths = 10000;
    std::size_t steps = 256;
    Scheme scheme = Scheme::ExponentialEM;
    std::uint64_t seed = 1;
    std::size_t threads = 0;
    double step_guard = 0.1;
};

struct McEstimate {
    double nu = 0.0;
    double p_hat = 0.0;
    double log_p_hat = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::size_t hits = 0;
    double rate_estimate = 0.0; // -nu log p_hat, +inf when p_hat = 0
    bool zero_hits = false;
    double ess = 0.0;           // effective sample size of the hit weights
};

struct MCResult {
    std::string estimator; // "plain" or "tilted"
    std::vector<double> nu_grid;
    std::vector<McEstimate> estimates;
    std::vector<std::string> warnings;
};

/// Stream id for path `path` of estimator `estimator` (0 plain, 1 tilted) at nu-grid index `nu_index`.
inline std::uint64_t mc_stream(std::uint64_t estimator, std::uint64_t nu_index, std::uint64_t path) noexcept
{
    return (estimator << 56) | (nu_index << 40) | path;
}

namespace detail {

struct PathOutcome {
    bool hit = false;
    double log_weight = 0.0;
};

// Weighted mean of indicator * exp(log_weight) in log-sum-exp form.
inline McEstimate reduce_paths(double nu, const std::vector<PathOutcome>& out, bool weighted)
{
    McEstimate e;
    e.nu = nu;
    e.n_paths = out.size();
    const double n = static_cast<double>(out.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& o : out)
        if (o.hit) {
            ++e.hits;
            mx = std::max(mx, weighted ? o.log_weight : 0.0);
        }
    if (e.hits == 0) {
        e.zero_hits = true;
        e.p_hat = 0.0;
        e.log_p_hat = -std::numeric_limits<double>::infinity();
        e.std_error = 0.0;
        e.rate_estimate = std::numeric_limits<double>::infinity();
        return e;
    }
    double s1 = 0.0, s2 = 0.0;
    for (const auto& o : out)
        if (o.hit) {
            const double y = std::exp((weighted ? o.log_weight : 0.0) - mx);
            s1 += y;
            s2 += y * y;
        }
    const double mean = s1 / n;
    // sample variance of y_i (zeros included), scaled back by exp(mx)
    const double var = std::max(0.0, (s2 - n * mean * mean) / (n - 1.0));
    e.log_p_hat = mx + std::log(mean);
    e.p_hat = std::exp(e.log_p_hat);
    e.std_error = std::exp(mx) * std::sqrt(var / n);
    e.rate_estimate = -nu * e.log_p_hat;
    e.ess = s1 * s1 / s2;
    return e;
}

} // namespace detail

/// Estimates P(u^nu(T) in target) for each nu. Plain mode simulates the uncontrolled
/// equation. With `tilt`, paths are driven by W = W~ + nu^{-1/2} int tilt with W~ a Q-Wiener
/// process, and each indicator carries dP/dQ = exp(-nu^{-1/2} sum (tilt, dW~)_0
/// - (2 nu)^{-1} int |tilt|_0^2). Shifting the increments keeps the weight exact for the
/// time-discrete scheme. The diffusion's nu field is replaced by each grid value.
inline MCResult mc_probability(const RateProblem& prob, const std::vector<double>& nu_grid, const McConfig& cfg,
                               const Control* tilt = nullptr)
{
    prob.validate();
    detail::require(cfg.n_paths >= 100, "mc_probability: n_paths must be >= 100");
    detail::require(!nu_grid.empty(), "mc_probability: nu_grid must not be empty");
    for (double nu : nu_grid) detail::require(std::isfinite(nu) && nu > 0.0, "mc_probability: nu values must be > 0");
    detail::require(cfg.scheme != Scheme::RK4, "mc_probability needs a stochastic scheme");
    detail::require(cfg.n_paths < (std::uint64_t{1} << 40) && nu_grid.size() < (std::size_t{1} << 16),
                    "mc_probability: too many paths or grid points for the stream layout");
    if (tilt) {
        detail::require(tilt->dim() == prob.model.dim(), "tilt dimension mismatch");
        detail::require(std::abs(tilt->horizon() - prob.T) <= 1e-12 * prob.T, "tilt horizon must equal T");
        detail::require(cfg.steps % tilt->cells() == 0, "mc steps must be a multiple of the tilt cell count");
    }

    MCResult res;
    res.estimator = tilt ? "tilted" : "plain";
    res.nu_grid = nu_grid;
    const double dt = prob.T / static_cast<double>(cfg.steps);
    const Control zero = Control::zero(prob.T, 1, prob.model.dim());
    const std::size_t m = prob.model.dim();

    for (std::size_t vi = 0; vi < nu_grid.size(); ++vi) {
        const double nu = nu_grid[vi];
        DiffusionSpec sig = prob.sigma;
        sig.nu = nu;
        SolverConfig sc;
        sc.T = prob.T;
        sc.steps = cfg.steps;
        sc.nu = nu;
        sc.scheme = cfg.scheme;
        sc.step_guard = cfg.step_guard;
        sc.alpha = prob.alpha;
        sc.record_every = cfg.steps;

        std::vector<detail::PathOutcome> out(cfg.n_paths);
        parallel_for(
            cfg.n_paths,
            [&](std::size_t p) {
                NoisePath w = sample_wiener(cfg.seed, cfg.steps, dt, prob.cov, mc_stream(tilt ? 1 : 0, vi, p));
                double logw = 0.0;
                if (tilt) {
                    const double inv_sq = 1.0 / std::sqrt(nu);
                    double cross = 0.0, energy = 0.0;
                    for (std::size_t k = 0; k < cfg.steps; ++k) {
                        const RkhsVector& hk = tilt->cell(tilt->cell_of_step(k, cfg.steps));
                        for (std::size_t j = 0; j < m; ++j) {
                            const int n = static_cast<int>(j + 1);
                            const cplx dW = w.increment(k, n);
                            cross += (hk[j].real() * dW.real() + hk[j].imag() * dW.imag()) / prob.cov.q[j];
                            energy += std::norm(hk[j]) / prob.cov.q[j] * dt;
                            w.increment(k, n) = dW + inv_sq * dt * hk[j];
                        }
                    }
                    logw = -inv_sq * cross - energy / (2.0 * nu);
                }
                const Trajectory tr = solve_viscous(prob.model, sig, sig, zero, prob.xi, w, sc);
                out[p].hit = target_hit(prob.model, prob.target, tr.states.back());
                out[p].log_weight = logw;
            },
            cfg.threads);

        McEstimate e = detail::reduce_paths(nu, out, tilt != nullptr);
        if (e.zero_hits)
            res.warnings.push_back("nu=" + std::to_string(nu) + ": no path hit the target; p_hat = 0, rate = inf");
        else if (tilt && e.ess < 0.01 * static_cast<double>(e.n_paths))
            res.warnings.push_back("nu=" + std::to_string(nu) + ": effective sample size below 1% of paths");
        res.estimates.push_back(e);
    }
    return res;
}

} // namespace shellldp
