#include <gtest/gtest.h>

#include <cmath>

#include "gen.hpp"
#include "shellldp/experiments.hpp"
#include "shellldp/montecarlo.hpp"
#include "shellldp/rate.hpp"

using namespace shellldp;

namespace {

// a = b = 0, k0 = 0.5, mu = 2; sigma has unit gains so u_n(T) = int h_n.
RateProblem linear_problem(int shell, double x, double q, double T, int m = 3, std::size_t steps = 64,
                           std::size_t cells = 8)
{
    ModelParams p;
    p.a = p.b = 0.0;
    p.k0 = 0.5;
    p.m = m;
    RateProblem prob;
    prob.model = ShellModel(p);
    prob.cov.q.assign(static_cast<std::size_t>(m), 0.1);
    prob.cov.q[static_cast<std::size_t>(shell - 1)] = q;
    DiffusionFamily f;
    f.gains.assign(static_cast<std::size_t>(m), 1.0);
    f.horizon = T;
    prob.sigma = make_diffusion(f, prob.model, prob.cov);
    prob.xi = ShellState(static_cast<std::size_t>(m));
    prob.T = T;
    prob.target = TerminalCoordinate{shell, x};
    prob.steps = steps;
    prob.cells = cells;
    return prob;
}

RateProblem goy_problem(const Target& target, std::size_t cells = 8)
{
    const Scenario s = standard_scenario(1e-2, cells);
    RateProblem prob;
    prob.model = s.model;
    prob.cov = s.cov;
    prob.sigma = s.sigma;
    prob.xi = s.xi;
    prob.T = s.T;
    prob.target = target;
    prob.steps = 128;
    prob.cells = cells;
    return prob;
}

Control random_control(gen::Engine& eng, const RateProblem& prob, double scale)
{
    Control h = prob.zero_control();
    for (std::size_t c = 0; c < h.cells(); ++c) {
        RkhsVector v = gen::rkhs(eng, prob.model.dim(), scale);
        for (std::size_t j = 0; j < v.size(); ++j) v[j] *= std::sqrt(prob.cov.q[j]);
        h.cell(c) = v;
    }
    return h;
}

WeakConvergenceSetup weak_setup(std::size_t steps = 2048)
{
    const Scenario s = standard_scenario(1e-4, 16);
    WeakConvergenceSetup w;
    w.model = s.model;
    w.sigma = s.sigma;
    w.cov = s.cov;
    w.xi = s.xi;
    w.T = s.T;
    w.h = s.h;
    w.steps = steps;
    w.direction = RkhsVector::basis(8, 1, 0.5);
    return w;
}

} // namespace

TEST(Cost, Examples)
{
    const CovarianceSpec cov{{0.5, 0.25}};
    EXPECT_EQ(cost(Control::zero(1.0, 4, 2), cov), 0.0);
    for (double x : {0.5, 1.0, 3.0})
        for (double T : {0.5, 2.0}) {
            RkhsVector h(2);
            h(2) = x / T;
            EXPECT_NEAR(cost(Control::constant(T, 7, h), cov), x * x / (2 * 0.25 * T), 1e-13);
        }
}

TEST(Property, CostIsExactlyQuadratic)
{
    gen::Engine eng(201);
    const RateProblem prob = linear_problem(1, 1.0, 0.5, 1.0, 4);
    for (int trial = 0; trial < 200; ++trial) {
        const Control h = random_control(eng, prob, 1.0), g = random_control(eng, prob, 1.0);
        const double l = gen::uniform(eng, 0, 1);
        const double mix = cost(l * h + (1 - l) * g, prob.cov);
        const double chord = l * cost(h, prob.cov) + (1 - l) * cost(g, prob.cov);
        const double gap = l * (1 - l) * cost(h + (-1.0) * g, prob.cov);
        ASSERT_LE(mix, chord * (1 + 1e-12));
        ASSERT_NEAR(mix, chord - gap, 1e-12 * (chord + 1));
    }
}

TEST(AdjointGradient, ZeroAtFeasibleOrigin)
{
    RateProblem prob = linear_problem(1, -0.5, 0.5, 1.0);
    const GradientResult g = adjoint_gradient(prob, prob.zero_control(), 10.0);
    EXPECT_EQ(g.J, 0.0);
    EXPECT_EQ(control_norm(g.gradient, prob.cov), 0.0);
}

// Oracle: central finite differences of J along random directions.
TEST(AdjointGradient, MatchesCentralDifferences)
{
    gen::Engine eng(203);
    std::vector<RateProblem> problems;
    problems.push_back(goy_problem(TerminalCoordinate{2, 1.0}));
    ShellState center(8);
    center(1) = 1.5;
    center(3) = cplx(0, 0.5);
    problems.push_back(goy_problem(TerminalBall{center, 0.1, 0.25}));
    RateProblem lin = goy_problem(TerminalCoordinate{1, 2.0});
    DiffusionFamily f;
    f.kind = DiffusionKind::LinearDiagonal;
    f.gains.assign(8, 0.7);
    f.slopes.assign(8, 0.4);
    f.time_amplitude = 0.3;
    lin.sigma = make_diffusion(f, lin.model, lin.cov);
    problems.push_back(lin);
    RateProblem sat = problems[1];
    f.kind = DiffusionKind::SaturatedNemytskii;
    sat.sigma = make_diffusion(f, sat.model, sat.cov);
    problems.push_back(sat);

    for (const RateProblem& prob : problems)
        for (int trial = 0; trial < 3; ++trial) {
            const Control h = random_control(eng, prob, 2.0);
            const Control d = random_control(eng, prob, 1.0);
            const GradientResult g = adjoint_gradient(prob, h, 50.0);
            ASSERT_GT(g.phi, 0.0);
            const double eps = 1e-4;
            const double jp = adjoint_gradient(prob, h + eps * d, 50.0).J;
            const double jm = adjoint_gradient(prob, h + (-eps) * d, 50.0).J;
            const double fd = (jp - jm) / (2 * eps);
            const double ad = control_inner(g.gradient, d, prob.cov);
            EXPECT_LT(std::abs(fd - ad) / std::max(std::abs(fd), 1e-12), 1e-5) << fd << " vs " << ad;
        }
}

TEST(MinimizeRate, ClosedFormSingleShell)
{
    OptConfig cfg;
    cfg.restarts = 2;
    for (auto [x, q, T] : {std::tuple{1.0, 0.5, 1.0}, std::tuple{2.0, 0.25, 0.5}, std::tuple{0.3, 0.05, 2.0}}) {
        const RateProblem prob = linear_problem(1, x, q, T);
        const OptimalControlResult r = minimize_rate(prob, cfg);
        EXPECT_TRUE(r.converged);
        EXPECT_NEAR(r.rate_value / (x * x / (2 * q * T)), 1.0, 1e-6);
        EXPECT_EQ(r.restarts.size(), 2u);
    }
}

TEST(MinimizeRate, ScalingInThresholdAndHorizonAndCovariance)
{
    OptConfig cfg;
    cfg.restarts = 1;
    const double base = minimize_rate(linear_problem(2, 1.0, 0.2, 1.0), cfg).rate_value;
    EXPECT_NEAR(minimize_rate(linear_problem(2, 2.0, 0.2, 1.0), cfg).rate_value / base, 4.0, 1e-6);
    EXPECT_NEAR(minimize_rate(linear_problem(2, 1.0, 0.2, 2.0), cfg).rate_value / base, 0.5, 1e-6);
    EXPECT_NEAR(minimize_rate(linear_problem(2, 1.0, 0.4, 1.0), cfg).rate_value / base, 0.5, 1e-6);
}

TEST(MinimizeRate, BallAroundSkeletonEndpointIsFree)
{
    RateProblem prob = goy_problem(TerminalCoordinate{});
    const Trajectory free = solve_inviscid(prob.model, prob.sigma, prob.zero_control(), prob.xi, prob.solver_config());
    for (double radius : {0.0, 0.05, 1.0}) {
        prob.target = TerminalBall{free.final_state(), radius, 0.25};
        const OptimalControlResult r = minimize_rate(prob);
        EXPECT_EQ(r.rate_value, 0.0);
        EXPECT_EQ(control_norm(r.h_star, prob.cov), 0.0);
        EXPECT_TRUE(r.converged);
    }
}

TEST(MinimizeRate, LargerTargetNeverCostsMore)
{
    const Scenario s = standard_scenario();
    const RateProblem probe = goy_problem(TerminalCoordinate{});
    const Trajectory free = solve_inviscid(probe.model, probe.sigma, probe.zero_control(), probe.xi, probe.solver_config());
    ShellState center = free.final_state();
    center(1) += 0.6;
    OptConfig cfg;
    cfg.restarts = 2;
    double prev = 1e300;
    for (double radius : {0.1, 0.3, 0.5}) {
        const OptimalControlResult r = minimize_rate(goy_problem(TerminalBall{center, radius, 0.0}), cfg);
        EXPECT_TRUE(r.converged) << radius;
        EXPECT_LE(r.rate_value, prev * (1 + 1e-6));
        EXPECT_GT(r.rate_value, 0.0);
        prev = r.rate_value;
    }
}

TEST(MinimizeRate, EnergyCapSaturates)
{
    RateProblem prob = linear_problem(1, 1.0, 0.5, 1.0);
    prob.M_cap = 1.0; // closed-form rate is 1, i.e. int |h|_0^2 = 2 > M
    OptConfig cfg;
    cfg.restarts = 1;
    const OptimalControlResult r = minimize_rate(prob, cfg);
    EXPECT_TRUE(r.saturated);
    EXPECT_LE(2 * r.rate_value, 1.0 + 1e-12);
    EXPECT_FALSE(r.converged);
}

TEST(RateProblem, Validation)
{
    RateProblem prob = linear_problem(1, 1.0, 0.5, 1.0);
    prob.alpha = 0.3;
    EXPECT_THROW(prob.validate(), DomainError);
    prob = linear_problem(1, 1.0, 0.5, 1.0);
    prob.target = TerminalCoordinate{4, 1.0};
    EXPECT_THROW(prob.validate(), DomainError);
    prob = linear_problem(1, 1.0, 0.5, 1.0);
    prob.steps = 60;
    EXPECT_THROW(prob.validate(), DomainError);
}

TEST(MonteCarlo, WholeSpaceEventIsCertain)
{
    RateProblem prob = linear_problem(1, -std::numeric_limits<double>::infinity(), 0.5, 1.0);
    McConfig cfg;
    cfg.n_paths = 200;
    cfg.steps = 16;
    const MCResult r = mc_probability(prob, {0.1, 0.01}, cfg);
    for (const auto& e : r.estimates) {
        EXPECT_EQ(e.p_hat, 1.0);
        EXPECT_EQ(e.hits, 200u);
        EXPECT_EQ(e.std_error, 0.0);
    }
    EXPECT_TRUE(r.warnings.empty());
}

TEST(MonteCarlo, ZeroHitsFlaggedWithInfiniteRate)
{
    RateProblem prob = linear_problem(1, 50.0, 0.5, 1.0);
    McConfig cfg;
    cfg.n_paths = 100;
    cfg.steps = 16;
    const MCResult r = mc_probability(prob, {0.01}, cfg);
    EXPECT_TRUE(r.estimates[0].zero_hits);
    EXPECT_EQ(r.estimates[0].p_hat, 0.0);
    EXPECT_TRUE(std::isinf(r.estimates[0].rate_estimate));
    EXPECT_EQ(r.warnings.size(), 1u);
    cfg.n_paths = 99;
    EXPECT_THROW(mc_probability(prob, {0.01}, cfg), DomainError);
}

// Oracle: u_1(T) is Gaussian (OU with k_1 = 1), P = 1/2 erfc(x / (sd sqrt 2)).
TEST(MonteCarlo, PlainAndTiltedAgreeWithExactTail)
{
    const double x = 0.5, q = 0.5, T = 1.0, nu = 0.1;
    const RateProblem prob = linear_problem(1, x, q, T, 3, 32, 8);
    const double k2 = std::pow(prob.model.k(1), 2);
    const double sd = std::sqrt(nu * q * (1 - std::exp(-2 * nu * k2 * T)) / (2 * nu * k2));
    const double exact = 0.5 * std::erfc(x / (sd * std::sqrt(2.0)));

    McConfig cfg;
    cfg.n_paths = 4000;
    cfg.steps = 32;
    const MCResult plain = mc_probability(prob, {nu}, cfg);
    const OptimalControlResult opt = minimize_rate(prob);
    const MCResult tilted = mc_probability(prob, {nu}, cfg, &opt.h_star);
    const McEstimate& p = plain.estimates[0];
    const McEstimate& t = tilted.estimates[0];
    const double se_exact = std::sqrt(exact * (1 - exact) / cfg.n_paths);
    EXPECT_LT(std::abs(p.p_hat - exact), 4 * se_exact);
    EXPECT_LT(std::abs(t.p_hat - exact), 4 * t.std_error);
    EXPECT_LT(std::abs(t.p_hat - p.p_hat), 4 * std::hypot(t.std_error, p.std_error));
    EXPECT_LT(t.std_error, p.std_error);
}

TEST(MonteCarlo, DeterministicAcrossThreadCounts)
{
    const RateProblem prob = linear_problem(1, 0.3, 0.5, 1.0, 3, 16, 8);
    McConfig cfg;
    cfg.n_paths = 300;
    cfg.steps = 16;
    cfg.threads = 1;
    const MCResult a = mc_probability(prob, {0.1}, cfg);
    cfg.threads = 3;
    const MCResult b = mc_probability(prob, {0.1}, cfg);
    EXPECT_EQ(a.estimates[0].p_hat, b.estimates[0].p_hat);
    EXPECT_EQ(a.estimates[0].std_error, b.estimates[0].std_error);
}

TEST(Property, BallEventMonotoneInAlpha)
{
    gen::Engine eng(211);
    const Scenario s = standard_scenario();
    const double k0 = s.model.params().k0;
    for (int trial = 0; trial < 500; ++trial) {
        const ShellState c = gen::state(eng, s.model), u = gen::state(eng, s.model);
        const double a = gen::uniform(eng, 0.05, 0.25), ap = gen::uniform(eng, 0, a);
        const double r = s.model.norm_alpha(u - c, a) * gen::uniform(eng, 0.5, 2.0);
        const bool hit = target_hit(s.model, TerminalBall{c, r, a}, u);
        const bool hit_lower = target_hit(s.model, TerminalBall{c, std::pow(k0, 2 * (ap - a)) * r * (1 + 1e-12), ap}, u);
        ASSERT_TRUE(!hit || hit_lower) << trial;
    }
}

TEST(WeakConvergence, ZeroAmplitudeEqualsPureNoiseBaseline)
{
    WeakConvergenceSetup w = weak_setup(1024);
    w.amplitude = 0.0;
    const auto a = weak_convergence_experiment(w, {1e-2}, 4, 9);
    w.perturbation = Perturbation::None;
    w.amplitude = 1.0;
    const auto b = weak_convergence_experiment(w, {1e-2}, 4, 9);
    EXPECT_EQ(a[0].mean_sup_error, b[0].mean_sup_error);
    EXPECT_EQ(a[0].std_error, b[0].std_error);
}

TEST(WeakConvergence, NoiselessErrorDecreases)
{
    for (Perturbation pert : {Perturbation::Oscillatory, Perturbation::RandomSignFlips}) {
        WeakConvergenceSetup w = weak_setup(4096);
        w.noise = false;
        w.perturbation = pert;
        const auto rows = weak_convergence_experiment(w, {1e-1, 1e-2, 1e-3}, 1, 3);
        ASSERT_EQ(rows.size(), 3u);
        EXPECT_EQ(rows[0].paths, 1u);
        EXPECT_GT(rows[0].mean_sup_error, rows[1].mean_sup_error) << to_string(pert);
        EXPECT_GT(rows[1].mean_sup_error, rows[2].mean_sup_error) << to_string(pert);
    }
}

TEST(WeakConvergence, ViscosityAloneIsFirstOrder)
{
    // The linear regime needs nu k_m^2 T small; below nu ~ 1e-5 the O(dt) gap between the
    // exponential Euler path and the RK4 reference takes over.
    WeakConvergenceSetup w = weak_setup(16384);
    w.noise = false;
    w.perturbation = Perturbation::None;
    const auto rows = weak_convergence_experiment(w, {1e-3, 1e-4, 1e-5}, 1, 3);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double ratio = rows[i].mean_sup_error / rows[i - 1].mean_sup_error;
        EXPECT_NEAR(ratio, 0.1, 0.025) << i;
    }
}

TEST(WeakConvergence, PerturbedControlConvergesWeakly)
{
    // int_0^t h_nu -> int_0^t h uniformly in t, while |h_nu - h|_{L^2} stays of order 1.
    WeakConvergenceSetup w = weak_setup(4096);
    double prev = 1e300;
    for (double nu : {1e-1, 1e-2, 1e-3}) {
        const Control hn = perturbed_control(w, nu, 1);
        double sup = 0;
        cplx acc = 0;
        for (std::size_t k = 0; k < w.steps; ++k) {
            acc += (hn.cell(k)(1) - w.h.at((k + 0.5) / w.steps)(1)) * (w.T / w.steps);
            sup = std::max(sup, std::abs(acc));
        }
        EXPECT_LT(sup, prev);
        prev = sup;
        Control diff = hn;
        diff.axpy(-1.0, Control::constant(w.T, w.steps, w.h.cell(0)));
        EXPECT_GT(control_norm(diff, w.cov), 1.0);
    }
}

TEST(LevelSet, ZeroRadiusCollapsesToOneTrajectory)
{
    const RateProblem prob = goy_problem(TerminalCoordinate{}, 8);
    const LevelSetReport r = level_set_probe(prob, 1.0, 4, 5, 0.0);
    EXPECT_EQ(r.diameter, 0.0);
    for (const auto& s : r.samples) EXPECT_EQ(s.energy, 0.0);
    EXPECT_TRUE(r.within_ceiling);
    EXPECT_THROW(level_set_probe(prob, 1.0, 1, 5), DomainError);
}

TEST(LevelSet, CeilingGrowsWithMAndBoundsTrajectories)
{
    const RateProblem prob = goy_problem(TerminalCoordinate{}, 8);
    const LevelSetReport a = level_set_probe(prob, 1.0, 8, 5);
    const LevelSetReport b = level_set_probe(prob, 2.0, 8, 5);
    EXPECT_TRUE(a.within_ceiling);
    EXPECT_TRUE(b.within_ceiling);
    EXPECT_GT(b.ceiling, a.ceiling);
    EXPECT_TRUE(std::isfinite(b.ceiling));
    for (const auto& s : a.samples) EXPECT_LE(2 * s.energy, 1.0 * (1 + 1e-12));
}

TEST(LevelSet, MollificationStaysUnderRecordedModulus)
{
    const RateProblem prob = goy_problem(TerminalCoordinate{}, 8);
    const LevelSetReport r = level_set_probe(prob, 1.0, 8, 5);
    // Baseline recorded from a verified run of this configuration (0.0086 measured).
    EXPECT_LT(r.max_modulus, 0.02);
    for (const auto& s : r.samples) EXPECT_LE(s.mollified_distance, r.max_modulus * s.control_distance * (1 + 1e-12));
}
