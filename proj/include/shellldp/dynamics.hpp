#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "shellldp/diffusion.hpp"
#include "shellldp/errors.hpp"
#include "shellldp/noise.hpp"
#include "shellldp/parallel.hpp"
#include "shellldp/spectral.hpp"

namespace shellldp {

enum class Scheme { RK4, SemiImplicitEM, ExponentialEM };

inline const char* to_string(Scheme s) noexcept
{
    switch (s) {
    case Scheme::RK4: return "RK4";
    case Scheme::SemiImplicitEM: return "SemiImplicitEM";
    case Scheme::ExponentialEM: return "ExponentialEM";
    }
    return "?";
}

struct SolverConfig {
    double T = 1.0;
    std::size_t steps = 1024;
    double nu = 0.0;
    Scheme scheme = Scheme::RK4;
    double monitor_N = std::numeric_limits<double>::infinity();
    std::size_t record_every = 1;
    /// Explicit-B guard: dt * rate(u) <= step_guard, rate the Gershgorin bound of DB(u).
    /// The inviscid solver substeps to honour it; the viscous solver rejects the step.
    /// 0 disables the guard.
    double step_guard = 0.1;
    /// Exponent of the ||.||_alpha monitor channel.
    double alpha = 0.25;

    double dt() const noexcept { return T / static_cast<double>(steps); }

    void validate() const
    {
        detail::require(std::isfinite(T) && T > 0.0, "solver.T must be > 0");
        detail::require(steps >= 1, "solver.steps must be >= 1");
        detail::require(std::isfinite(nu) && nu >= 0.0, "solver.nu must be >= 0");
        detail::require(record_every >= 1, "solver.record_every must be >= 1");
        detail::require(step_guard >= 0.0, "solver.step_guard must be >= 0");
        detail::require(alpha >= 0.0, "solver.alpha must be >= 0");
        if (scheme == Scheme::RK4) detail::require(nu == 0.0, "RK4 is the inviscid scheme; it requires nu = 0");
        else detail::require(nu > 0.0, "stochastic schemes require nu > 0");
    }
};

struct Channels {
    double h_norm = 0.0;
    double v_norm = 0.0;
    double calH_norm = 0.0;
    double alpha_norm = 0.0;
    double A_norm = 0.0;
    double energy_residual = 0.0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<ShellState> states;
    std::vector<Channels> channels;
    double alpha = 0.25;
    std::vector<std::string> warnings;

    std::size_t size() const noexcept { return times.size(); }
    const ShellState& final_state() const { return states.back(); }
};

namespace detail {

inline Channels make_channels(const ShellModel& model, const ShellState& u, double alpha, double energy_residual)
{
    return {model.h_norm(u), model.v_norm(u), model.calH_norm(u), model.norm_alpha(u, alpha), model.A_norm(u),
            energy_residual};
}

inline void record(Trajectory& tr, const ShellModel& model, double t, const ShellState& u, double alpha, double e)
{
    tr.times.push_back(t);
    tr.states.push_back(u);
    tr.channels.push_back(make_channels(model, u, alpha, e));
}

inline void check_blowup(const ShellState& u, double xi_norm, double t)
{
    const double n = std::sqrt(squared_norm(u));
    if (!std::isfinite(n) || n > 1e6 * (1.0 + xi_norm))
        throw NumericalError("blow-up at t = " + std::to_string(t) +
                             ": |u| exceeded 1e6 (1 + |xi|); step too large or diffusion conditions violated");
}

/// f(t, u) = -B(u) + sigma(t,u) h
inline ShellState skeleton_field(const ShellModel& model, const DiffusionSpec& sigma, double t, const ShellState& u,
                                 const RkhsVector& h)
{
    ShellState f = model.quadratic(u);
    f *= -1.0;
    for (std::size_t j = 0; j < u.size(); ++j) f[j] += sigma.gain(j, t, std::abs(u[j])) * h[j];
    return f;
}

/// (sigma(t,u) h, u)
inline double control_power(const DiffusionSpec& sigma, double t, const ShellState& u, const RkhsVector& h)
{
    double s = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        const cplx z = sigma.gain(j, t, std::abs(u[j])) * h[j];
        s += z.real() * u[j].real() + z.imag() * u[j].imag();
    }
    return s;
}

/// One classical RK4 step of du/dt = f(t,u) with h frozen. `work` accumulates the RK4
/// quadrature of 2 (sigma h, u) so that |u|^2 - work is the discrete energy balance.
inline ShellState rk4_step(const ShellModel& model, const DiffusionSpec& sigma, double t, double dt,
                           const ShellState& u, const RkhsVector& h, double* work = nullptr)
{
    const ShellState k1 = skeleton_field(model, sigma, t, u, h);
    ShellState u2 = u;
    u2.axpy(0.5 * dt, k1);
    const ShellState k2 = skeleton_field(model, sigma, t + 0.5 * dt, u2, h);
    ShellState u3 = u;
    u3.axpy(0.5 * dt, k2);
    const ShellState k3 = skeleton_field(model, sigma, t + 0.5 * dt, u3, h);
    ShellState u4 = u;
    u4.axpy(dt, k3);
    const ShellState k4 = skeleton_field(model, sigma, t + dt, u4, h);
    if (work) {
        *work += dt / 6.0 *
                 (2.0 * control_power(sigma, t, u, h) + 4.0 * control_power(sigma, t + 0.5 * dt, u2, h) +
                  4.0 * control_power(sigma, t + 0.5 * dt, u3, h) + 2.0 * control_power(sigma, t + dt, u4, h));
    }
    ShellState next = u;
    next.axpy(dt / 6.0, k1);
    next.axpy(dt / 3.0, k2);
    next.axpy(dt / 3.0, k3);
    next.axpy(dt / 6.0, k4);
    return next;
}

/// Substeps needed on one outer step so that each substep satisfies the explicit-B guard.
inline std::size_t guard_substeps(const ShellModel& model, const ShellState& u, double dt, double guard)
{
    if (guard <= 0.0) return 1;
    const double rate = model.stiffness_rate(u);
    if (!(rate > 0.0)) return 1;
    const double need = std::ceil(dt * rate / guard);
    if (!std::isfinite(need) || need > 65536.0)
        throw NumericalError("step guard requires more than 65536 substeps; state is blowing up");
    return std::max<std::size_t>(1, static_cast<std::size_t>(need));
}

inline bool should_record(std::size_t step, std::size_t steps, std::size_t every) noexcept
{
    return step % every == 0 || step == steps;
}

} // namespace detail

/// RK4 solution of the skeleton equation du/dt = -B(u) + sigma(t,u) h(t), u(0) = xi.
/// The control is frozen over each step (steps must be a multiple of h.cells()).
inline Trajectory solve_inviscid(const ShellModel& model, const DiffusionSpec& sigma, const Control& h,
                                 const ShellState& xi, const SolverConfig& cfg)
{
    cfg.validate();
    detail::require(cfg.scheme == Scheme::RK4, "solve_inviscid uses the RK4 scheme");
    model.check_dim(xi);
    detail::require(h.dim() == model.dim() && sigma.dim() == model.dim(), "solve_inviscid: dimension mismatch");
    detail::require(std::abs(h.horizon() - cfg.T) <= 1e-12 * cfg.T, "control horizon must equal solver.T");

    Trajectory tr;
    tr.alpha = cfg.alpha;
    if (!model.params().enstrophy_exact())
        tr.warnings.push_back("a(1+mu^2)+b mu^2 != 0: enstrophy is not conserved and the V-norm bound may fail");

    const double dt = cfg.dt();
    const double xi_sq = squared_norm(xi), xi_norm = std::sqrt(xi_sq);
    ShellState u = xi;
    double work = 0.0;
    detail::record(tr, model, 0.0, u, cfg.alpha, 0.0);
    for (std::size_t k = 0; k < cfg.steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const RkhsVector& hk = h.cell(h.cell_of_step(k, cfg.steps));
        const std::size_t sub = detail::guard_substeps(model, u, dt, cfg.step_guard);
        const double ds = dt / static_cast<double>(sub);
        for (std::size_t s = 0; s < sub; ++s)
            u = detail::rk4_step(model, sigma, t + static_cast<double>(s) * ds, ds, u, hk, &work);
        detail::check_blowup(u, xi_norm, t + dt);
        if (detail::should_record(k + 1, cfg.steps, cfg.record_every))
            detail::record(tr, model, static_cast<double>(k + 1) * dt, u, cfg.alpha, squared_norm(u) - xi_sq - work);
    }
    return tr;
}

/// One path of du = [-nu A u - B(u) + sigma~(t,u) h] dt + sqrt(nu) sigma_nu(t,u) dW.
/// ExponentialEM: u <- e^{-L} u + phi1(L) dt N(u) + psi(L) sqrt(nu) sigma dW per shell, with
/// L = nu k_n^2 dt, phi1(z) = (1 - e^{-z})/z and psi(z) = sqrt((1 - e^{-2z})/(2z)), so the
/// linear part and the additive-noise variance are exact. SemiImplicitEM: backward Euler in A.
/// The energy_residual channel carries the discrete Ito balance
/// |u|^2 - |xi|^2 + 2 nu sum ||u||^2 dt - 2 sum (sigma~ h, u) dt - 2 sum (G, u) - sum |G|^2,
/// G the realised noise increment.
inline Trajectory solve_viscous(const ShellModel& model, const DiffusionSpec& sigma_nu, const DiffusionSpec& sigma_tilde,
                                const Control& h, const ShellState& xi, const NoisePath& noise,
                                const SolverConfig& cfg)
{
    detail::require(cfg.T / static_cast<double>(std::max<std::size_t>(cfg.steps, 1)) > 0.0, "dt must be > 0");
    cfg.validate();
    detail::require(cfg.scheme != Scheme::RK4, "solve_viscous needs a stochastic scheme");
    model.check_dim(xi);
    detail::require(h.dim() == model.dim() && sigma_nu.dim() == model.dim() && sigma_tilde.dim() == model.dim(),
                    "solve_viscous: dimension mismatch");
    detail::require(noise.steps() == cfg.steps && noise.dim() == model.dim(),
                    "noise path does not match solver steps / truncation");
    detail::require(std::abs(noise.dt() - cfg.dt()) <= 1e-12 * cfg.dt(), "noise dt does not match solver dt");
    detail::require(std::abs(h.horizon() - cfg.T) <= 1e-12 * cfg.T, "control horizon must equal solver.T");

    const std::size_t m = model.dim();
    const double dt = cfg.dt(), sq_nu = std::sqrt(cfg.nu);
    std::vector<double> decay(m), phi1(m), psi(m), implicit(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double z = cfg.nu * std::pow(model.k(static_cast<int>(j + 1)), 2) * dt;
        decay[j] = std::exp(-z);
        phi1[j] = z < 1e-12 ? 1.0 - 0.5 * z : -std::expm1(-z) / z;
        psi[j] = z < 1e-12 ? 1.0 - 0.5 * z : std::sqrt(-std::expm1(-2.0 * z) / (2.0 * z));
        implicit[j] = 1.0 / (1.0 + z);
    }

    Trajectory tr;
    tr.alpha = cfg.alpha;
    const double xi_sq = squared_norm(xi), xi_norm = std::sqrt(xi_sq);
    ShellState u = xi;
    double balance = 0.0; // everything in the Ito balance except |u|^2 - |xi|^2
    detail::record(tr, model, 0.0, u, cfg.alpha, 0.0);
    for (std::size_t k = 0; k < cfg.steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        if (cfg.step_guard > 0.0 && dt * model.stiffness_rate(u) > cfg.step_guard)
            throw NumericalError("step too large for the explicit B term at t = " + std::to_string(t) +
                                 " (dt * rate > step_guard)");
        const RkhsVector& hk = h.cell(h.cell_of_step(k, cfg.steps));
        const ShellState Bu = model.quadratic(u);
        const double vu = model.v_norm(u);
        balance += 2.0 * cfg.nu * vu * vu * dt;
        ShellState next(m);
        for (std::size_t j = 0; j < m; ++j) {
            const double r = std::abs(u[j]);
            const cplx ctrl = sigma_tilde.gain(j, t, r) * hk[j];
            const cplx G = sq_nu * sigma_nu.gain(j, t, r) * noise.increment(k, static_cast<int>(j + 1));
            const cplx N = -Bu[j] + ctrl;
            balance -= 2.0 * dt * (ctrl.real() * u[j].real() + ctrl.imag() * u[j].imag());
            balance -= 2.0 * (G.real() * u[j].real() + G.imag() * u[j].imag()) + std::norm(G);
            if (cfg.scheme == Scheme::ExponentialEM) next[j] = decay[j] * u[j] + phi1[j] * dt * N + psi[j] * G;
            else next[j] = implicit[j] * (u[j] + dt * N + G);
        }
        u = std::move(next);
        detail::check_blowup(u, xi_norm, t + dt);
        if (detail::should_record(k + 1, cfg.steps, cfg.record_every))
            detail::record(tr, model, static_cast<double>(k + 1) * dt, u, cfg.alpha, squared_norm(u) - xi_sq + balance);
    }
    return tr;
}

/// Regression tripwires for the a priori bounds: ceilings of the form C_H (1 + |xi|^4) on
/// sup|u|^4 + nu int ||u||^2 + nu int ||u||_H^4 and C_V (1 + ||xi||)^2 on sup ||u||^2.
struct AprioriCeilings {
    double C_H = std::numeric_limits<double>::infinity();
    double C_V = std::numeric_limits<double>::infinity();
};

struct AprioriReport {
    double sup_h4 = 0.0;
    double nu_int_v2 = 0.0;
    double nu_int_calH4 = 0.0;
    double sup_v2 = 0.0;
    double nu_int_A2 = 0.0;
    double int_A2 = 0.0;
    double ceiling_h = 0.0;
    double ceiling_v = 0.0;
    bool pass_h = true;
    bool pass_v = true;
};

namespace detail {

// Trapezoid rule over the recorded times.
template <class F>
double integrate_recorded(const Trajectory& tr, F&& f)
{
    double s = 0.0;
    for (std::size_t i = 1; i < tr.size(); ++i)
        s += 0.5 * (tr.times[i] - tr.times[i - 1]) * (f(tr.channels[i - 1]) + f(tr.channels[i]));
    return s;
}

} // namespace detail

inline AprioriReport apriori_monitor(const ShellModel& model, const Trajectory& tr, double nu,
                                     const AprioriCeilings& ceilings = {})
{
    detail::require(tr.size() >= 1, "apriori_monitor: empty trajectory");
    AprioriReport r;
    for (const auto& c : tr.channels) {
        r.sup_h4 = std::max(r.sup_h4, std::pow(c.h_norm, 4));
        r.sup_v2 = std::max(r.sup_v2, c.v_norm * c.v_norm);
    }
    r.int_A2 = detail::integrate_recorded(tr, [](const Channels& c) { return c.A_norm * c.A_norm; });
    r.nu_int_A2 = nu * r.int_A2;
    r.nu_int_v2 = nu * detail::integrate_recorded(tr, [](const Channels& c) { return c.v_norm * c.v_norm; });
    r.nu_int_calH4 = nu * detail::integrate_recorded(tr, [](const Channels& c) { return std::pow(c.calH_norm, 4); });
    const double xh = model.h_norm(tr.states.front()), xv = model.v_norm(tr.states.front());
    r.ceiling_h = ceilings.C_H * (1.0 + std::pow(xh, 4));
    r.ceiling_v = ceilings.C_V * std::pow(1.0 + xv, 2);
    r.pass_h = r.sup_h4 + r.nu_int_v2 + r.nu_int_calH4 <= r.ceiling_h;
    r.pass_v = r.sup_v2 <= r.ceiling_v;
    return r;
}

/// G_N event: sup ||u||^2 v int |Au|^2 <= N.
inline bool within_G_N(const Trajectory& tr, double N)
{
    double sup_v2 = 0.0;
    for (const auto& c : tr.channels) sup_v2 = std::max(sup_v2, c.v_norm * c.v_norm);
    const double int_A2 = detail::integrate_recorded(tr, [](const Channels& c) { return c.A_norm * c.A_norm; });
    return std::max(sup_v2, int_A2) <= N;
}

/// I_n = int_0^T ||u(s) - u(s_n)||^2 ds with s_n = k T 2^{-n} on [(k-1) T 2^{-n}, k T 2^{-n}),
/// by the trapezoid rule on the recorded grid (uniform, count divisible by 2^n).
inline double increment_integral(const ShellModel& model, const Trajectory& tr, int n)
{
    detail::require(n >= 0 && n < 62, "increment_integral: n out of range");
    detail::require(tr.size() >= 2, "increment_integral: trajectory too short");
    const std::size_t intervals = tr.size() - 1;
    const std::size_t blocks = std::size_t{1} << n;
    detail::require(intervals % blocks == 0, "increment_integral: recorded grid must be divisible by 2^n");
    const std::size_t per = intervals / blocks;
    const double h = tr.times.back() / static_cast<double>(intervals);
    double total = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t right = (b + 1) * per;
        const ShellState& ur = tr.states[right];
        // f at the right end is 0: the step map takes that point to itself.
        for (std::size_t i = b * per; i < right; ++i) {
            const double vi = std::pow(model.v_norm(tr.states[i] - ur), 2);
            total += (i == b * per ? 0.5 : 1.0) * h * vi;
        }
    }
    return total;
}

struct IncrementStats {
    std::vector<int> n_range;
    std::vector<double> values;
    double fitted_slope = 0.0; // decay rate: minus the least-squares slope of log2 I_n vs n
    std::size_t paths = 0;
    std::size_t discarded = 0;
};

/// Averages I_n over paths produced by `solve(path_index)`, with paths outside G_N counting
/// as zero (the indicator 1_{G_N}), then fits log2 I_n against n.
inline IncrementStats time_increment_study(const ShellModel& model,
                                           const std::function<Trajectory(std::size_t)>& solve,
                                           std::size_t n_paths, const std::vector<int>& n_range, double monitor_N,
                                           std::size_t threads = 0)
{
    detail::require(n_paths >= 1, "time_increment_study: need at least one path");
    detail::require(!n_range.empty(), "time_increment_study: empty n range");
    std::vector<std::vector<double>> per_path(n_paths);
    std::vector<char> kept(n_paths, 0);
    parallel_for(
        n_paths,
        [&](std::size_t p) {
            const Trajectory tr = solve(p);
            const std::size_t intervals = tr.size() - 1;
            for (int n : n_range)
                detail::require(n >= 2 && (std::size_t{1} << n) <= intervals,
                                "time_increment_study: n must lie in [2, log2 steps]");
            if (!within_G_N(tr, monitor_N)) return;
            kept[p] = 1;
            for (int n : n_range) per_path[p].push_back(increment_integral(model, tr, n));
        },
        threads);

    IncrementStats st;
    st.n_range = n_range;
    st.paths = n_paths;
    st.values.assign(n_range.size(), 0.0);
    for (std::size_t p = 0; p < n_paths; ++p) {
        if (!kept[p]) {
            ++st.discarded;
            continue;
        }
        for (std::size_t i = 0; i < n_range.size(); ++i) st.values[i] += per_path[p][i];
    }
    for (auto& v : st.values) v /= static_cast<double>(n_paths);

    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n_range.size(); ++i)
        if (st.values[i] > 0.0 && std::isfinite(st.values[i])) {
            xs.push_back(n_range[i]);
            ys.push_back(std::log2(st.values[i]));
        }
    if (xs.size() < 3) throw NumericalError("time_increment_study: fewer than 3 positive I_n values to fit");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    st.fitted_slope = -sxy / sxx;
    return st;
}

} // namespace shellldp
