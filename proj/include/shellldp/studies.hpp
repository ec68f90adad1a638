#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shellldp/config.hpp"
#include "shellldp/diffusion.hpp"
#include "shellldp/dynamics.hpp"
#include "shellldp/experiments.hpp"
#include "shellldp/io.hpp"
#include "shellldp/montecarlo.hpp"
#include "shellldp/random.hpp"
#include "shellldp/rate.hpp"
#include "shellldp/spectral.hpp"

namespace shellldp {

/// Everything a study produces; the caller decides where it goes.
struct StudyOutput {
    std::string csv;
    json document = json::object();
    std::string snapshot; // binary, empty when not produced
    std::string summary;  // one line for stdout
    int exit_code = 0;    // 0, or 3 when the study ran but did not converge / an identity failed
};

namespace study {

inline std::string provenance_line(const ExperimentConfig& c)
{
    return std::string("tool=") + tool_name + " version=" + tool_version + " study=" + c.study +
           " config_hash=" + c.hash + " seed=" + std::to_string(c.seed);
}

inline json provenance(const ExperimentConfig& c)
{
    return {{"tool", tool_name},
            {"version", tool_version},
            {"schema_version", schema_version},
            {"study", c.study},
            {"config_hash", c.hash},
            {"seed", c.seed},
            {"config", c.canonical}};
}

inline json to_json(const ConditionConstants& k)
{
    return {{"K0", k.K0},   {"K1", k.K1},   {"K2", k.K2},   {"L1", k.L1},   {"L2", k.L2},   {"Kt0", k.Kt0},
            {"Kt1", k.Kt1}, {"Kt2", k.Kt2}, {"KtH", k.KtH}, {"Lt1", k.Lt1}, {"Lt2", k.Lt2}, {"Kb0", k.Kb0},
            {"Kb1", k.Kb1}, {"Kb2", k.Kb2}, {"KbH", k.KbH}, {"Lb1", k.Lb1}, {"Lb2", k.Lb2}, {"Cb", k.Cb},
            {"L3", k.L3},   {"gamma", k.gamma}};
}

inline json to_json(const ShellState& u)
{
    json a = json::array();
    for (std::size_t i = 0; i < u.size(); ++i) a.push_back({u[i].real(), u[i].imag()});
    return a;
}

inline json to_json(const Control& h)
{
    json cells = json::array();
    for (const auto& v : h.values()) {
        json a = json::array();
        for (std::size_t i = 0; i < v.size(); ++i) a.push_back({v[i].real(), v[i].imag()});
        cells.push_back(std::move(a));
    }
    return {{"horizon", h.horizon()}, {"cells", cells}};
}

// JSON has no infinities; they are written as strings.
inline json number(double v)
{
    if (std::isfinite(v)) return v;
    return format_double(v);
}

inline double alpha_for_constants(const ExperimentConfig& c) { return std::min(c.solver.alpha, 0.25); }

/// sigma alone (the skeleton coefficient).
inline DiffusionSpec sigma_of(const ExperimentConfig& c)
{
    return make_diffusion(c.diffusion, ShellModel(c.model), c.cov, alpha_for_constants(c));
}

/// sigma + sqrt(nu) sigma_bar at the given nu (sigma alone without a diffusion_bar block).
inline DiffusionSpec sigma_nu_of(const ExperimentConfig& c, double nu)
{
    const ShellModel model(c.model);
    const DiffusionSpec s = sigma_of(c);
    if (!c.diffusion_bar) return s;
    return compose_sigma_nu(s, make_diffusion(*c.diffusion_bar, model, c.cov, alpha_for_constants(c)), nu);
}

inline std::vector<double> nu_grid(const json& p, const std::string& path, std::vector<double> fallback)
{
    if (!p.contains("nu_grid")) return fallback;
    auto v = cfg::numbers(p.at("nu_grid"), path + "/nu_grid");
    cfg::check(!v.empty(), path + "/nu_grid", "nu_grid must not be empty");
    for (std::size_t i = 0; i < v.size(); ++i)
        cfg::check(std::isfinite(v[i]) && v[i] > 0.0, path + "/nu_grid/" + std::to_string(i), "nu must be > 0");
    return v;
}

inline RateProblem rate_problem(const ExperimentConfig& c, const json& p, bool needs_target)
{
    RateProblem prob;
    prob.model = ShellModel(c.model);
    prob.sigma = sigma_of(c);
    prob.cov = c.cov;
    prob.xi = c.xi;
    prob.T = c.solver.T;
    prob.steps = c.solver.steps;
    prob.step_guard = c.solver.step_guard;
    prob.cells = cfg::count(p, "/params", "cells", c.control.cells());
    prob.M_cap = cfg::number(p, "/params", "M_cap", std::numeric_limits<double>::infinity());
    prob.alpha = c.solver.alpha;
    cfg::check(prob.alpha <= 0.25, "/solver/alpha", "rate problems need alpha <= 1/4");
    cfg::check(prob.cells >= 1 && prob.steps % prob.cells == 0, "/params/cells",
               "solver.steps must be a multiple of cells");
    cfg::check(prob.M_cap > 0.0, "/params/M_cap", "M_cap must be > 0");
    if (needs_target) {
        cfg::check(p.contains("target"), "/params/target", "missing required key");
        prob.target = parse_target(p.at("target"), "/params/target", prob.model.dim());
    }
    return prob;
}

inline json trajectory_summary(const ShellModel& model, const Trajectory& tr, double nu, double monitor_N)
{
    const auto rep = apriori_monitor(model, tr, nu);
    const auto& last = tr.channels.back();
    return {{"final_time", tr.times.back()},
            {"final_state", to_json(tr.final_state())},
            {"final_h_norm", last.h_norm},
            {"final_v_norm", last.v_norm},
            {"final_alpha_norm", last.alpha_norm},
            {"energy_residual", last.energy_residual},
            {"apriori",
             {{"sup_h4", rep.sup_h4},
              {"nu_int_v2", rep.nu_int_v2},
              {"nu_int_calH4", rep.nu_int_calH4},
              {"sup_v2", rep.sup_v2},
              {"int_A2", rep.int_A2}}},
            {"monitor_N", number(monitor_N)},
            {"within_G_N", within_G_N(tr, monitor_N)},
            {"warnings", tr.warnings}};
}

inline StudyOutput trajectory_output(const ExperimentConfig& c, const Trajectory& tr, const DiffusionSpec& spec)
{
    const ShellModel model(c.model);
    StudyOutput out;
    std::ostringstream csv;
    write_trajectory_csv(csv, tr, provenance_line(c));
    out.csv = csv.str();
    out.document["provenance"] = provenance(c);
    out.document["constants"] = to_json(spec.constants);
    out.document["result"] = trajectory_summary(model, tr, c.solver.nu, c.solver.monitor_N);
    if (!c.output.snapshot.empty()) {
        std::ostringstream bin(std::ios::binary);
        write_snapshot(bin, tr);
        out.snapshot = bin.str();
    }
    const auto& last = tr.channels.back();
    out.summary = c.study + ": " + std::to_string(tr.size()) + " records, |u(T)| = " + format_double(last.h_norm) +
                  ", energy residual = " + format_double(last.energy_residual);
    return out;
}

inline StudyOutput simulate(const ExperimentConfig& c)
{
    const json& p = c.params;
    cfg::allow_keys(p, "/params", {"path"});
    cfg::check(c.solver.nu > 0.0, "/solver/nu", "simulate needs nu > 0 (use the skeleton study for nu = 0)");
    cfg::check(c.solver.scheme != Scheme::RK4, "/solver/scheme", "simulate needs a stochastic scheme");
    const std::uint64_t path = cfg::count(p, "/params", "path", 0);
    const ShellModel model(c.model);
    const DiffusionSpec sig_nu = sigma_nu_of(c, c.solver.nu);
    const DiffusionSpec sig = sigma_of(c);
    const NoisePath w = sample_wiener(c.seed, c.solver.steps, c.solver.dt(), c.cov, path);
    const Trajectory tr = solve_viscous(model, sig_nu, sig, c.control, c.xi, w, c.solver);
    return trajectory_output(c, tr, sig_nu);
}

inline StudyOutput skeleton(const ExperimentConfig& c)
{
    cfg::allow_keys(c.params, "/params", {});
    cfg::check(c.solver.nu == 0.0, "/solver/nu", "the skeleton is inviscid: nu must be 0");
    cfg::check(c.solver.scheme == Scheme::RK4, "/solver/scheme", "the skeleton uses RK4");
    const ShellModel model(c.model);
    const DiffusionSpec sig = sigma_of(c);
    const Trajectory tr = solve_inviscid(model, sig, c.control, c.xi, c.solver);
    return trajectory_output(c, tr, sig);
}

inline StudyOutput identities(const ExperimentConfig& c)
{
    const json& p = c.params;
    cfg::allow_keys(p, "/params", {"samples", "m_list"});
    const std::size_t samples = cfg::count(p, "/params", "samples", 1000);
    cfg::check(samples >= 1, "/params/samples", "samples must be >= 1");
    std::vector<int> ms{c.model.m};
    if (p.contains("m_list")) {
        ms.clear();
        for (double v : cfg::numbers(p.at("m_list"), "/params/m_list")) {
            cfg::check(v >= 3 && v <= 4096 && v == std::floor(v), "/params/m_list", "entries must be integers in [3, 4096]");
            ms.push_back(static_cast<int>(v));
        }
    }

    std::ostringstream csv;
    csv << "# " << provenance_line(c) << '\n' << "m,check,max_relative_residual,tolerance,pass\n";
    json rows = json::array();
    bool all = true;
    auto emit = [&](int m, const std::string& name, double value, double tol, bool pass) {
        csv << m << ',' << name << ',' << format_double(value) << ',' << format_double(tol) << ','
            << (pass ? "true" : "false") << '\n';
        rows.push_back({{"m", m}, {"check", name}, {"value", number(value)}, {"tolerance", number(tol)}, {"pass", pass}});
        all = all && pass;
    };
    for (int m : ms) {
        ModelParams mp = c.model;
        mp.m = m;
        const ShellModel model(mp);
        const GaussianStream gs(c.seed, static_cast<std::uint64_t>(m));
        auto draw = [&](std::uint32_t s, std::uint32_t which) {
            ShellState u(model.dim());
            for (int n = 1; n <= m; ++n) {
                const auto [re, im] = gs.normal_pair(s, static_cast<std::uint32_t>(3 * (n - 1)) + which);
                u(n) = cplx(re, im) / model.k(n);
            }
            return u;
        };
        double anti = 0.0, energy = 0.0, enst = 0.0, ratio = 0.0;
        for (std::size_t s = 0; s < samples; ++s) {
            const auto u = draw(static_cast<std::uint32_t>(s), 0), v = draw(static_cast<std::uint32_t>(s), 1),
                       w = draw(static_cast<std::uint32_t>(s), 2);
            const auto r = model.identity_report(u, v, w);
            anti = std::max(anti, r.antisymmetry_relative());
            energy = std::max(energy, r.energy_flux_relative());
            enst = std::max(enst, r.enstrophy_flux_relative());
            ratio = std::max(ratio, r.operator_ratio);
        }
        emit(m, "antisymmetry", anti, 1e-12, anti <= 1e-12);
        emit(m, "energy_flux", energy, 1e-12, energy <= 1e-12);
        if (mp.enstrophy_exact()) emit(m, "enstrophy_flux", enst, 1e-10, enst <= 1e-10);
        else emit(m, "enstrophy_defect", enst, 1e-10, enst > 1e-10);
        emit(m, "operator_ratio_max", ratio, std::numeric_limits<double>::infinity(), std::isfinite(ratio));
    }
    StudyOutput out;
    out.csv = csv.str();
    out.document["provenance"] = provenance(c);
    out.document["result"] = {{"rows", rows}, {"all_pass", all}, {"samples", samples}};
    out.exit_code = all ? 0 : 3;
    out.summary = std::string("identities: ") + (all ? "all checks pass" : "some checks FAIL") + " over " +
                  std::to_string(samples) + " samples";
    return out;
}

inline json restart_json(const RestartSummary& s)
{
    return {{"rate_value", s.rate_value},       {"terminal_residual", s.terminal_residual},
            {"gradient_norm", s.gradient_norm}, {"iterations", s.iterations},
            {"converged", s.converged},         {"saturated", s.saturated}};
}

inline json optimum_json(const OptimalControlResult& r)
{
    json restarts = json::array();
    for (const auto& s : r.restarts) restarts.push_back(restart_json(s));
    return {{"rate_value", r.rate_value},
            {"terminal_residual", r.terminal_residual},
            {"gradient_norm_final", r.gradient_norm_final},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"saturated", r.saturated},
            {"multiplier", r.multiplier},
            {"best_restart", r.best_restart},
            {"restarts", restarts},
            {"h_star", to_json(r.h_star)}};
}

inline StudyOutput rate(const ExperimentConfig& c)
{
    const json& p = c.params;
    cfg::allow_keys(p, "/params", {"target", "M_cap", "cells", "optimizer"});
    const RateProblem prob = rate_problem(c, p, true);
    const OptConfig oc = parse_optimizer(p.value("optimizer", json::object()), "/params/optimizer", c.seed);
    const auto r = minimize_rate(prob, oc);

    std::ostringstream csv;
    csv << "# " << provenance_line(c) << '\n'
        << "restart,rate_value,terminal_residual,gradient_norm,iterations,converged,saturated,best\n";
    for (std::size_t i = 0; i < r.restarts.size(); ++i) {
        const auto& s = r.restarts[i];
        csv << i << ',' << format_double(s.rate_value) << ',' << format_double(s.terminal_residual) << ','
            << format_double(s.gradient_norm) << ',' << s.iterations << ',' << (s.converged ? "true" : "false") << ','
            << (s.saturated ? "true" : "false") << ',' << (i == r.best_restart ? "true" : "false") << '\n';
    }
    StudyOutput out;
    out.csv = csv.str();
    out.document["provenance"] = provenance(c);
    out.document["constants"] = to_json(prob.sigma.constants);
    out.document["result"] = optimum_json(r);
    out.exit_code = r.converged ? 0 : 3;
    out.summary = "rate: rate_value = " + format_double(r.rate_value) +
                  ", terminal_residual = " + format_double(r.terminal_residual) +
                  (r.converged ? ", converged" : ", NOT converged");
    return out;
}

inline McConfig mc_config(const ExperimentConfig& c, const json& p)
{
    McConfig mc;
    mc.n_paths = cfg::count(p, "/params", "n_paths", 10000);
    mc.steps = cfg::count(p, "/params", "steps", c.solver.steps);
    mc.seed = c.seed;
    mc.scheme = c.solver.scheme == Scheme::RK4 ? Scheme::ExponentialEM : c.solver.scheme;
    mc.step_guard = c.solver.step_guard;
    cfg::check(mc.n_paths >= 100, "/params/n_paths", "n_paths must be >= 100");
    cfg::check(mc.steps >= 1, "/params/steps", "steps must be >= 1");
    return mc;
}

inline StudyOutput mc_ldp(const ExperimentConfig& c)
{
    const json& p = c.params;
    cfg::allow_keys(p, "/params", {"target", "M_cap", "cells", "optimizer", "nu_grid", "n_paths", "steps", "estimator"});
    const RateProblem prob = rate_problem(c, p, true);
    const OptConfig oc = parse_optimizer(p.value("optimizer", json::object()), "/params/optimizer", c.seed);
    const auto grid = nu_grid(p, "/params", {1e-1, 3e-2, 1e-2, 3e-3});
    const McConfig mc = mc_config(c, p);
    const std::string which = cfg::text(p, "/params", "estimator", "both");
    cfg::check(which == "plain" || which == "tilted" || which == "both", "/params/estimator",
               "expected \"plain\", \"tilted\" or \"both\"");
    cfg::check(mc.steps % prob.cells == 0, "/params/steps", "steps must be a multiple of cells");

    const auto opt = minimize_rate(prob, oc);
    std::vector<MCResult> results;
    if (which != "tilted") results.push_back(mc_probability(prob, grid, mc));
    if (which != "plain") results.push_back(mc_probability(prob, grid, mc, &opt.h_star));

    std::ostringstream csv;
    csv << "# " << provenance_line(c) << '\n'
        << "estimator,nu,p_hat,stderr,n_paths,hits,nu_log_p,rate_upper_bound\n";
    json res = json::array();
    std::vector<std::string> warnings;
    for (const auto& r : results) {
        json ests = json::array();
        for (const auto& e : r.estimates) {
            csv << r.estimator << ',' << format_double(e.nu) << ',' << format_double(e.p_hat) << ','
                << format_double(e.std_error) << ',' << e.n_paths << ',' << e.hits << ','
                << format_double(e.rate_estimate) << ',' << format_double(opt.rate_value) << '\n';
            ests.push_back({{"nu", e.nu},
                            {"p_hat", e.p_hat},
                            {"log_p_hat", number(e.log_p_hat)},
                            {"stderr", e.std_error},
                            {"n_paths", e.n_paths},
                            {"hits", e.hits},
                            {"nu_log_p", number(e.rate_estimate)},
                            {"zero_hits", e.zero_hits},
                            {"ess", e.ess}});
        }
        for (const auto& w : r.warnings) warnings.push_back(r.estimator + ": " + w);
        res.push_back({{"estimator", r.estimator}, {"estimates", ests}, {"warnings", r.warnings}});
    }
    StudyOutput out;
    out.csv = csv.str();
    out.document["provenance"] = provenance(c);
    out.document["constants"] = to_json(prob.sigma.constants);
    out.document["result"] = {{"rate", optimum_json(opt)}, {"estimators", res}};
    out.exit_code = 0;
    out.summary = "mc-ldp: rate upper bound = " + format_double(opt.rate_value) + ", " +
                  std::to_string(grid.size()) + " nu values, " + std::to_string(warnings.size()) + " warnings";
    return out;
}

inline StudyOutput weak_convergence(const ExperimentConfig& c)
{
    const json& p = c.params;
    cfg::allow_keys(p, "/params",
                    {"nu_grid", "n_paths", "perturbation", "amplitude", "direction", "frequency", "noise", "M_cap"});
    WeakConvergenceSetup w;
    w.model = ShellModel(c.model);
    // the experiment sets the nu of the composed coefficient per grid value
    w.sigma = c.diffusion_bar ? sigma_nu_of(c, 1.0) : sigma_of(c);
    w.cov = c.cov;
    w.xi = c.xi;
    w.T = c.solver.T;
    w.steps = c.solver.steps;
    w.alpha = c.solver.alpha;
    w.h = c.control;
    w.step_guard = c.solver.step_guard;
    w.scheme = c.solver.scheme == Scheme::RK4 ? Scheme::ExponentialEM : c.solver.scheme;
    const std::string kind = cfg::text(p, "/params", "perturbation", "Oscillatory");
    if (kind == "Oscillatory") w.perturbation = Perturbation::Oscillatory;
    else if (kind == "RandomSignFlips") w.perturbation = Perturbation::RandomSignFlips;
    else if (kind == "None") w.perturbation = Perturbation::None;
    else throw ConfigError("/params/perturbation", "expected \"Oscillatory\", \"RandomSignFlips\" or \"None\"");
    w.amplitude = cfg::number(p, "/params", "amplitude", 1.0);
    w.frequency = cfg::number(p, "/params", "frequency", 1.0);
    w.noise = cfg::flag(p, "/params", "noise", true);
    w.M_cap = cfg::number(p, "/params", "M_cap", std::numeric_limits<double>::infinity());
    w.direction = p.contains("direction") ? cfg::shell_vector<RkhsVector>(p.at("direction"), "/params/direction", w.model.dim())
                                          : RkhsVector::basis(w.model.dim(), 1, 1.0);
    cfg::check(w.frequency > 0.0 && std::isfinite(w.frequency), "/params/frequency", "frequency must be > 0");
    cfg::check(std::isfinite(w.amplitude), "/params/amplitude", "amplitude must be finite");
    cfg::check(w.steps % w.h.cells() == 0, "/control/cells", "solver.steps must be a multiple of control.cells");
    const std::size_t n_paths = cfg::count(p, "/params", "n_paths", 20);
    cfg::check(n_paths >= 1, "/params/n_paths", "n_paths must be >= 1");
    const auto grid = nu_grid(p, "/params", {1e-1, 1e-2, 1e-3});

    const auto rows = weak_convergence_experiment(w, grid, n_paths, c.seed);
    std::ostringstream csv;
    csv << "# " << provenance_line(c) << '\n' << "nu,mean_sup_error,stderr,paths,control_energy\n";
    json jr = json::array();
    for (const auto& r : rows) {
        csv << format_double(r.nu) << ',' << format_double(r.mean_sup_error) << ',' << format_double(r.std_error) << ','
            << r.paths << ',' << format_double(r.control_energy) << '\n';
        jr.push_back({{"nu", r.nu},
                      {"mean_sup_error", r.mean_sup_error},
                      {"stderr", r.std_error},
                      {"paths", r.paths},
                      {"control_energy", r.control_energy}});
    }
    StudyOutput out;
    out.csv = csv.str();
    out.document["provenance"] = provenance(c);
    out.document["result"] = {{"rows", jr}, {"perturbation", to_string(w.perturbation)}};
    out.summary = "weak-convergence: sup-error " + format_double(rows.front().mean_sup_error) + " at nu = " +
                  format_double(rows.front().nu) + " -> " + format_double(rows.back().mean_sup_error) + " at nu = " +
                  format_double(rows.back().nu);
    return out;
}

inline StudyOutput increments(const ExperimentConfig& c)
{
    const json& p = c.params;
    cfg::allow_keys(p, "/params", {"n_paths", "n_min", "n_max"});
    const std::size_t n_paths = cfg::count(p, "/params", "n_paths", c.solver.nu > 0.0 ? 100 : 1);
    const int n_min = static_cast<int>(cfg::count(p, "/params", "n_min", 3));
    const int n_max = static_cast<int>(cfg::count(p, "/params", "n_max", 8));
    cfg::check(n_paths >= 1, "/params/n_paths", "n_paths must be >= 1");
    cfg::check(n_min >= 2 && n_max >= n_min + 2, "/params/n_max", "need 2 <= n_min and n_max >= n_min + 2");
    cfg::check(c.solver.steps % (std::size_t{1} << n_max) == 0 && c.solver.record_every == 1, "/solver/steps",
               "steps must be divisible by 2^n_max with record_every = 1");
    std::vector<int> range;
    for (int n = n_min; n <= n_max; ++n) range.push_back(n);

    const ShellModel model(c.model);
    const DiffusionSpec sig = sigma_of(c);
    const DiffusionSpec sig_nu = sigma_nu_of(c, c.solver.nu);
    std::function<Trajectory(std::size_t)> solve;
    if (c.solver.nu == 0.0) solve = [&](std::size_t) { return solve_inviscid(model, sig, c.control, c.xi, c.solver); };
    else
        solve = [&](std::size_t path) {
            const NoisePath w = sample_wiener(c.seed, c.solver.steps, c.solver.dt(), c.cov, mc_stream(4, 0, path));
            return solve_viscous(model, sig_nu, sig, c.control, c.xi, w, c.solver);
        };
    const auto st = time_increment_study(model, solve, n_paths, range, c.solver.monitor_N);

    std::ostringstream csv;
    csv << "# " << provenance_line(c) << '\n' << "n,I_n\n";
    for (std::size_t i = 0; i < st.n_range.size(); ++i) csv << st.n_range[i] << ',' << format_double(st.values[i]) << '\n';
    StudyOutput out;
    out.csv = csv.str();
    out.document["provenance"] = provenance(c);
    out.document["result"] = {{"n", st.n_range},
                              {"I_n", st.values},
                              {"fitted_slope", st.fitted_slope},
                              {"paths", st.paths},
                              {"discarded", st.discarded}};
    out.summary = "increments: fitted slope = " + format_double(st.fitted_slope) + " over " +
                  std::to_string(st.paths) + " paths (" + std::to_string(st.discarded) + " outside G_N)";
    return out;
}

inline StudyOutput levelset(const ExperimentConfig& c)
{
    const json& p = c.params;
    cfg::allow_keys(p, "/params", {"M", "n_controls", "radius_scale", "cells"});
    RateProblem prob = rate_problem(c, p, false);
    const double M = cfg::number(p, "/params", "M", 1.0);
    const std::size_t n = cfg::count(p, "/params", "n_controls", 16);
    const double scale = cfg::number(p, "/params", "radius_scale", 1.0);
    cfg::check(std::isfinite(M) && M >= 0.0, "/params/M", "M must be finite and >= 0");
    cfg::check(n >= 2, "/params/n_controls", "n_controls must be >= 2");
    cfg::check(scale >= 0.0 && scale <= 1.0, "/params/radius_scale", "radius_scale must lie in [0, 1]");
    cfg::check(prob.steps % (2 * prob.cells) == 0, "/solver/steps", "steps must be a multiple of 2 * cells");
    const auto rep = level_set_probe(prob, M, n, c.seed, scale);

    std::ostringstream csv;
    csv << "# " << provenance_line(c) << '\n'
        << "index,energy,sup_h_norm,sup_alpha_norm,mollified_distance,control_distance\n";
    json samples = json::array();
    for (std::size_t i = 0; i < rep.samples.size(); ++i) {
        const auto& s = rep.samples[i];
        csv << i << ',' << format_double(s.energy) << ',' << format_double(s.sup_h_norm) << ','
            << format_double(s.sup_alpha_norm) << ',' << format_double(s.mollified_distance) << ','
            << format_double(s.control_distance) << '\n';
        samples.push_back({{"energy", s.energy},
                           {"sup_h_norm", s.sup_h_norm},
                           {"sup_alpha_norm", s.sup_alpha_norm},
                           {"mollified_distance", s.mollified_distance},
                           {"control_distance", s.control_distance}});
    }
    StudyOutput out;
    out.csv = csv.str();
    out.document["provenance"] = provenance(c);
    out.document["result"] = {{"M", rep.M},
                              {"sup_h_norm", rep.sup_h_norm},
                              {"ceiling", rep.ceiling},
                              {"within_ceiling", rep.within_ceiling},
                              {"diameter", rep.diameter},
                              {"max_modulus", rep.max_modulus},
                              {"samples", samples}};
    out.exit_code = rep.within_ceiling ? 0 : 3;
    out.summary = "levelset: sup |u| = " + format_double(rep.sup_h_norm) + " (ceiling " + format_double(rep.ceiling) +
                  "), diameter = " + format_double(rep.diameter) + ", max modulus = " + format_double(rep.max_modulus);
    return out;
}

} // namespace study

inline StudyOutput run_study(const ExperimentConfig& c)
{
    if (c.study == "simulate") return study::simulate(c);
    if (c.study == "skeleton") return study::skeleton(c);
    if (c.study == "identities") return study::identities(c);
    if (c.study == "rate") return study::rate(c);
    if (c.study == "mc-ldp") return study::mc_ldp(c);
    if (c.study == "weak-convergence") return study::weak_convergence(c);
    if (c.study == "increments") return study::increments(c);
    if (c.study == "levelset") return study::levelset(c);
    throw ConfigError("/study", "unknown study");
}

} // namespace shellldp
