#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "shellldp/diffusion.hpp"
#include "shellldp/dynamics.hpp"
#include "shellldp/errors.hpp"
#include "shellldp/montecarlo.hpp"
#include "shellldp/noise.hpp"
#include "shellldp/parallel.hpp"
#include "shellldp/random.hpp"
#include "shellldp/rate.hpp"
#include "shellldp/spectral.hpp"

namespace shellldp {

/// Reference setting shared by the tests and sample configs: enstrophy-conserving GOY
/// (a=1, b=-5/4, mu=2, k0=1, m=8), xi on the three lowest shells, q_n = q_scale 4^{-n},
/// unit constant diagonal diffusion, T=1 and a constant control driving shell 1.
struct Scenario {
    ShellModel model{ModelParams{}};
    CovarianceSpec cov;
    DiffusionSpec sigma;
    ShellState xi;
    double T = 1.0;
    Control h;
};

inline Scenario standard_scenario(double q_scale = 1e-2, std::size_t cells = 16)
{
    Scenario s;
    const std::size_t m = s.model.dim();
    s.cov.q.resize(m);
    for (std::size_t j = 0; j < m; ++j) s.cov.q[j] = q_scale * std::pow(4.0, -static_cast<double>(j + 1));
    DiffusionFamily f;
    f.kind = DiffusionKind::ConstantDiagonal;
    f.gains.assign(m, 1.0);
    f.horizon = s.T;
    s.sigma = make_diffusion(f, s.model, s.cov);
    s.xi = ShellState(m);
    s.xi(1) = cplx(0.5, 0.0);
    s.xi(2) = cplx(0.0, 0.25);
    s.xi(3) = cplx(0.125, 0.125);
    RkhsVector h0(m);
    h0(1) = cplx(0.25, 0.0);
    s.h = Control::constant(s.T, cells, h0);
    return s;
}

enum class Perturbation { None, Oscillatory, RandomSignFlips };

inline const char* to_string(Perturbation p) noexcept
{
    switch (p) {
    case Perturbation::None: return "None";
    case Perturbation::Oscillatory: return "Oscillatory";
    case Perturbation::RandomSignFlips: return "RandomSignFlips";
    }
    return "?";
}

struct WeakConvergenceSetup {
    ShellModel model{ModelParams{}};
    DiffusionSpec sigma; // sigma (+ sqrt(nu) sigma_bar when sigma.sigma_bar is set)
    CovarianceSpec cov;
    ShellState xi;
    double T = 1.0;
    std::size_t steps = 4096;
    double alpha = 0.25;
    Control h;
    Perturbation perturbation = Perturbation::Oscillatory;
    double amplitude = 1.0;
    RkhsVector direction;
    double frequency = 1.0; // oscillation frequency (or flip rate) is frequency / nu
    double M_cap = std::numeric_limits<double>::infinity();
    bool noise = true;
    Scheme scheme = Scheme::ExponentialEM;
    double step_guard = 0.1;
};

struct WeakConvergenceRow {
    double nu = 0.0;
    double mean_sup_error = 0.0;
    double std_error = 0.0;
    std::size_t paths = 0;
    double control_energy = 0.0;
};

/// h_nu on the solver grid (one cell per step): h plus amplitude * s(t / (nu / frequency)) *
/// direction, with s = sin(2 pi .) or i.i.d. +-1 blocks, averaged exactly over each step.
inline Control perturbed_control(const WeakConvergenceSetup& w, double nu, std::uint64_t seed)
{
    const std::size_t steps = w.steps;
    const double dt = w.T / static_cast<double>(steps);
    const double period = nu / w.frequency;
    const GaussianStream flips(seed, 0xF11F5ull);
    auto block_sign = [&](std::uint64_t b) {
        return flips.uniform(static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)) < 0.5 ? -1.0 : 1.0;
    };
    std::vector<RkhsVector> cells(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t0 = static_cast<double>(k) * dt, t1 = t0 + dt;
        double s = 0.0;
        switch (w.perturbation) {
        case Perturbation::None: break;
        case Perturbation::Oscillatory: {
            const double c = 2.0 * std::numbers::pi / period;
            s = (std::cos(c * t0) - std::cos(c * t1)) / (c * dt);
            break;
        }
        case Perturbation::RandomSignFlips: {
            auto b = static_cast<std::uint64_t>(std::floor(t0 / period));
            const auto b_end = static_cast<std::uint64_t>(std::floor(t1 / period));
            double acc = 0.0;
            for (double a = t0; b <= b_end; ++b) {
                const double e = std::min(t1, static_cast<double>(b + 1) * period);
                if (e > a) acc += block_sign(b) * (e - a);
                a = e;
            }
            s = acc / dt;
            break;
        }
        }
        RkhsVector v = w.h.at(t0 + 0.5 * dt);
        if (s != 0.0) v.axpy(w.amplitude * s, w.direction);
        cells[k] = std::move(v);
    }
    return Control(w.T, std::move(cells));
}

/// For each nu: mean over paths of sup_t ||u^nu_{h_nu}(t) - u^0_h(t)||_alpha, the skeleton
/// u^0_h solved by RK4 on the same grid.
inline std::vector<WeakConvergenceRow> weak_convergence_experiment(const WeakConvergenceSetup& w,
                                                                   const std::vector<double>& nu_grid,
                                                                   std::size_t n_paths, std::uint64_t seed,
                                                                   std::size_t threads = 0)
{
    detail::require(n_paths >= 1, "weak_convergence_experiment: n_paths must be >= 1");
    detail::require(w.direction.size() == w.model.dim(), "perturbation direction dimension mismatch");
    detail::require(w.steps % w.h.cells() == 0, "steps must be a multiple of the control cell count");
    for (double nu : nu_grid) detail::require(std::isfinite(nu) && nu > 0.0, "nu values must be > 0");

    DiffusionSpec sigma0 = w.sigma;
    sigma0.nu = 0.0;
    SolverConfig rk;
    rk.T = w.T;
    rk.steps = w.steps;
    rk.scheme = Scheme::RK4;
    rk.alpha = w.alpha;
    rk.step_guard = w.step_guard;
    const Trajectory ref = solve_inviscid(w.model, sigma0, w.h, w.xi, rk);

    std::vector<WeakConvergenceRow> rows;
    for (std::size_t vi = 0; vi < nu_grid.size(); ++vi) {
        const double nu = nu_grid[vi];
        const Control h_nu = perturbed_control(w, nu, seed);
        const double energy = h_nu.energy(w.cov);
        if (2.0 * energy > w.M_cap) throw DomainError("perturbed control leaves S_M");
        DiffusionSpec sig = w.sigma;
        sig.nu = nu;
        SolverConfig sc = rk;
        sc.nu = nu;
        sc.scheme = w.scheme;

        const std::size_t paths = w.noise ? n_paths : 1;
        std::vector<double> err(paths);
        parallel_for(
            paths,
            [&](std::size_t p) {
                NoisePath path = w.noise ? sample_wiener(seed, w.steps, sc.dt(), w.cov, mc_stream(2, vi, p))
                                         : NoisePath(seed, 0, sc.dt(), w.steps, w.model.dim());
                const Trajectory tr = solve_viscous(w.model, sig, sigma0, h_nu, w.xi, path, sc);
                double e = 0.0;
                for (std::size_t i = 0; i < tr.size(); ++i)
                    e = std::max(e, w.model.norm_alpha(tr.states[i] - ref.states[i], w.alpha));
                err[p] = e;
            },
            threads);
        double mean = 0.0;
        for (double e : err) mean += e;
        mean /= static_cast<double>(paths);
        double var = 0.0;
        for (double e : err) var += (e - mean) * (e - mean);
        WeakConvergenceRow row;
        row.nu = nu;
        row.mean_sup_error = mean;
        row.std_error = paths > 1 ? std::sqrt(var / static_cast<double>(paths - 1) / static_cast<double>(paths)) : 0.0;
        row.paths = paths;
        row.control_energy = energy;
        rows.push_back(row);
    }
    return rows;
}

struct LevelSetSample {
    double energy = 0.0;             // 1/2 int |h|_0^2
    double sup_h_norm = 0.0;         // sup_t |u_h(t)|
    double sup_alpha_norm = 0.0;     // sup_t ||u_h(t)||_alpha
    double mollified_distance = 0.0; // sup_t ||u_h - u_{h~}||_alpha
    double control_distance = 0.0;   // ||h - h~||_{L^2(H0)}
};

struct LevelSetReport {
    double M = 0.0;
    std::vector<LevelSetSample> samples;
    double sup_h_norm = 0.0;
    double ceiling = 0.0;  // Gronwall bound on sup_t |u_h(t)| over S_M
    bool within_ceiling = false;
    double diameter = 0.0; // max pairwise sup_t ||u_h - u_g||_alpha
    double max_modulus = 0.0; // max mollified_distance / control_distance
};

namespace detail {

// sup_j sqrt(q_j) phi_j(r) <= A + B r
inline std::pair<double, double> affine_gain_bound(const DiffusionFamily& f, const CovarianceSpec& cov)
{
    double A = 0.0, B = 0.0;
    for (std::size_t j = 0; j < f.dim(); ++j) {
        const double sq = std::sqrt(cov.q[j]);
        switch (f.kind) {
        case DiffusionKind::ConstantDiagonal: A = std::max(A, sq * std::abs(f.gains[j])); break;
        case DiffusionKind::LinearDiagonal:
            A = std::max(A, sq * std::abs(f.gains[j]));
            B = std::max(B, sq * std::abs(f.slopes[j]));
            break;
        case DiffusionKind::SaturatedNemytskii: A = std::max(A, sq * std::abs(f.gains[j]) * f.saturation); break;
        }
    }
    return {A, B};
}

// Moving average over one original cell width on a grid of 2 * cells half-cells.
inline Control mollify(const Control& h)
{
    const std::size_t n = h.cells();
    std::vector<RkhsVector> out(2 * n);
    for (std::size_t s = 0; s < 2 * n; ++s) {
        const std::size_t c = s / 2;
        const std::size_t nb = (s % 2 == 0) ? (c == 0 ? 0 : c - 1) : std::min(c + 1, n - 1);
        RkhsVector v = h.cell(c);
        v += h.cell(nb);
        v *= 0.5;
        out[s] = std::move(v);
    }
    return Control(h.horizon(), std::move(out));
}

inline Control refine(const Control& h)
{
    std::vector<RkhsVector> out;
    for (const auto& v : h.values()) {
        out.push_back(v);
        out.push_back(v);
    }
    return Control(h.horizon(), std::move(out));
}

} // namespace detail

/// Samples n_controls controls with 1/2 int |h|_0^2 = radius_scale * u * M/2, u uniform on
/// (0, 1], solves the skeleton for each, and probes equicontinuity by mollification.
inline LevelSetReport level_set_probe(const RateProblem& prob, double M, std::size_t n_controls, std::uint64_t seed,
                                      double radius_scale = 1.0, std::size_t threads = 0)
{
    prob.validate();
    detail::require(n_controls >= 2, "level_set_probe: n_controls must be >= 2");
    detail::require(std::isfinite(M) && M >= 0.0, "level_set_probe: M must be finite and >= 0");
    detail::require(radius_scale >= 0.0 && radius_scale <= 1.0, "level_set_probe: radius_scale must lie in [0, 1]");
    detail::require(prob.steps % (2 * prob.cells) == 0, "level_set_probe: steps must be a multiple of 2 * cells");

    const std::size_t m = prob.model.dim();
    DiffusionSpec sigma0 = prob.sigma;
    sigma0.nu = 0.0;
    SolverConfig cfg = prob.solver_config();

    std::vector<Control> controls(n_controls);
    std::vector<Trajectory> trajs(n_controls);
    LevelSetReport rep;
    rep.M = M;
    rep.samples.resize(n_controls);
    parallel_for(
        n_controls,
        [&](std::size_t i) {
            const GaussianStream gs(seed, mc_stream(3, 0, i));
            Control h = prob.zero_control();
            for (std::size_t c = 0; c < h.cells(); ++c)
                for (std::size_t j = 0; j < m; ++j) {
                    const auto [re, im] = gs.normal_pair(static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(j));
                    h.cell(c)[j] = std::sqrt(prob.cov.q[j]) * cplx(re, im);
                }
            const double target = radius_scale * gs.uniform(0xFFFFFFFFu, 0) * 0.5 * M;
            const double e = h.energy(prob.cov);
            h *= e > 0.0 ? std::sqrt(target / e) : 0.0;

            Control hm = detail::mollify(h);
            const double em = hm.energy(prob.cov);
            if (em > 0.0) hm *= std::sqrt(h.energy(prob.cov) / em);

            Trajectory tr = solve_inviscid(prob.model, sigma0, h, prob.xi, cfg);
            const Trajectory trm = solve_inviscid(prob.model, sigma0, hm, prob.xi, cfg);
            LevelSetSample& s = rep.samples[i];
            s.energy = h.energy(prob.cov);
            for (std::size_t k = 0; k < tr.size(); ++k) {
                s.sup_h_norm = std::max(s.sup_h_norm, tr.channels[k].h_norm);
                s.sup_alpha_norm = std::max(s.sup_alpha_norm, tr.channels[k].alpha_norm);
                s.mollified_distance =
                    std::max(s.mollified_distance, prob.model.norm_alpha(tr.states[k] - trm.states[k], prob.alpha));
            }
            Control diff = detail::refine(h);
            diff.axpy(-1.0, hm);
            s.control_distance = control_norm(diff, prob.cov);
            controls[i] = std::move(h);
            trajs[i] = std::move(tr);
        },
        threads);

    for (std::size_t i = 0; i < n_controls; ++i) {
        const auto& s = rep.samples[i];
        rep.sup_h_norm = std::max(rep.sup_h_norm, s.sup_h_norm);
        if (s.control_distance > 0.0) rep.max_modulus = std::max(rep.max_modulus, s.mollified_distance / s.control_distance);
        for (std::size_t j = i + 1; j < n_controls; ++j)
            for (std::size_t k = 0; k < trajs[i].size(); ++k)
                rep.diameter = std::max(rep.diameter,
                                        prob.model.norm_alpha(trajs[i].states[k] - trajs[j].states[k], prob.alpha));
    }

    // d|u|/dt <= |sigma(t,u) h|_H <= theta (A + B |u|) |h|_0 and int |h|_0 <= sqrt(T M).
    const auto [A, B] = detail::affine_gain_bound(prob.sigma.sigma, prob.cov);
    const double theta = prob.sigma.sigma.max_time_factor();
    const double L = theta * std::sqrt(prob.T * M);
    rep.ceiling = (std::sqrt(squared_norm(prob.xi)) + A * L) * std::exp(B * L);
    rep.within_ceiling = rep.sup_h_norm <= rep.ceiling * (1.0 + 1e-9);
    return rep;
}

} // namespace shellldp
