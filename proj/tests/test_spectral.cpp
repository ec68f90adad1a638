#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gen.hpp"
#include "shellldp/spectral.hpp"

using namespace shellldp;

namespace {

ShellModel goy(double a = 1.0, double b = -1.25, int m = 8, double k0 = 1.0)
{
    ModelParams p;
    p.a = a;
    p.b = b;
    p.k0 = k0;
    p.m = m;
    return ShellModel(p);
}

ShellModel sabra(double a, double b, int m = 8)
{
    ModelParams p;
    p.variant = Variant::Sabra;
    p.a = a;
    p.b = b;
    p.m = m;
    return ShellModel(p);
}

ShellState e(std::size_t m, int n) { return ShellState::basis(m, n); }

// Independent evaluation of the GOY / Sabra formulas with u_{-1} = u_0 = u_{m+1} = u_{m+2} = 0.
std::vector<cplx> oracle_B(Variant var, double a, double b, double k0, double mu, const ShellState& u,
                           const ShellState& v)
{
    const int m = static_cast<int>(u.size());
    auto U = [&](int n) { return n >= 1 && n <= m ? u(n) : cplx(0); };
    auto V = [&](int n) { return n >= 1 && n <= m ? v(n) : cplx(0); };
    auto k = [&](int n) { return k0 * std::pow(mu, n); };
    const cplx I(0, 1);
    std::vector<cplx> r(static_cast<std::size_t>(m));
    for (int n = 1; n <= m; ++n) {
        cplx s;
        if (var == Variant::GOY)
            s = a * k(n + 1) * std::conj(U(n + 1)) * std::conj(V(n + 2)) +
                b * k(n) * std::conj(U(n - 1)) * std::conj(V(n + 1)) -
                a * k(n - 1) * std::conj(U(n - 1)) * std::conj(V(n - 2)) -
                b * k(n - 1) * std::conj(U(n - 2)) * std::conj(V(n - 1));
        else
            s = a * k(n + 1) * std::conj(U(n + 1)) * V(n + 2) + b * k(n) * std::conj(U(n - 1)) * V(n + 1) +
                a * k(n - 1) * U(n - 1) * V(n - 2) + b * k(n - 1) * U(n - 2) * V(n - 1);
        r[static_cast<std::size_t>(n - 1)] = -I * s;
    }
    return r;
}

} // namespace

TEST(Wavenumber, Examples)
{
    ModelParams p;
    p.m = 10;
    EXPECT_DOUBLE_EQ(wavenumber(p, 3), 8.0);
    EXPECT_DOUBLE_EQ(wavenumber(p, 10), 1024.0);
    p.k0 = 0.5;
    EXPECT_DOUBLE_EQ(wavenumber(p, 1), 1.0);
    EXPECT_THROW(wavenumber(p, 0), DomainError);
    EXPECT_THROW(wavenumber(p, 13), DomainError);
}

TEST(ModelParams, RejectsBadGeometry)
{
    ModelParams p;
    p.mu = 1.0;
    EXPECT_THROW(ShellModel{p}, DomainError);
    p = {};
    p.m = 2;
    EXPECT_THROW(ShellModel{p}, DomainError);
    p = {};
    p.k0 = 0.0;
    EXPECT_THROW(ShellModel{p}, DomainError);
}

TEST(FractionalA, Examples)
{
    const ShellModel m = goy();
    const ShellState a = m.apply_fractional_A(e(8, 2), 1.0);
    for (int n = 1; n <= 8; ++n) EXPECT_EQ(a(n), n == 2 ? cplx(16.0) : cplx(0.0));
    const ShellState h = m.apply_fractional_A(e(8, 3), 0.5);
    EXPECT_DOUBLE_EQ(h(3).real(), 8.0);

    gen::Engine eng(3);
    const ShellState u = gen::state(eng, m);
    EXPECT_EQ(m.apply_fractional_A(u, 0.0), u);
    EXPECT_THROW(m.apply_fractional_A(u, -0.1), DomainError);
}

TEST(NormAlpha, Examples)
{
    const ShellModel m = goy();
    for (double alpha : {0.0, 0.125, 0.25, 0.5})
        for (int n = 1; n <= 8; ++n) EXPECT_NEAR(m.norm_alpha(e(8, n), alpha), std::pow(m.k(n), 2 * alpha), 1e-12);
    ShellState u(8);
    u(1) = cplx(3, 4);
    EXPECT_DOUBLE_EQ(m.norm_alpha(u, 0.0), 5.0);
}

TEST(InnerH, Examples)
{
    EXPECT_DOUBLE_EQ(inner_h(e(4, 1), e(4, 1)), 1.0);
    EXPECT_DOUBLE_EQ(inner_h(e(4, 1), e(4, 2)), 0.0);
    ShellState u(4), v(4);
    u(1) = cplx(0, 1);
    v(1) = 1.0;
    EXPECT_DOUBLE_EQ(inner_h(u, v), 0.0);
    EXPECT_DOUBLE_EQ(duality_pair(e(4, 1), e(4, 1)), 1.0);
    EXPECT_THROW(inner_h(ShellState(3), ShellState(4)), DomainError);
}

// By hand: for u = e_1, v = e_2 only the (n-2, n-1) = (1, 2) term at n = 3 survives.
TEST(Bilinear, BasisExamples)
{
    for (double b : {1.0, -1.25, 0.5}) {
        const ShellModel g = goy(1.0, b);
        const ShellState r = g.bilinear(e(8, 1), e(8, 2));
        for (int n = 1; n <= 8; ++n) {
            if (n == 3) {
                EXPECT_NEAR(r(3).real(), 0.0, 1e-14);
                EXPECT_NEAR(r(3).imag(), 4.0 * b, 1e-14);
            } else {
                EXPECT_EQ(r(n), cplx(0.0)) << n;
            }
        }
        const ShellState s = sabra(1.0, b).bilinear(e(8, 1), e(8, 2));
        EXPECT_NEAR(s(3).imag(), -4.0 * b, 1e-14);
        EXPECT_NEAR(s(3).real(), 0.0, 1e-14);
    }
    // <B(e1,e2), e3> = Re(4bi) = 0
    const ShellModel g = goy(1.0, 1.0);
    EXPECT_DOUBLE_EQ(duality_pair(g.bilinear(e(8, 1), e(8, 2)), e(8, 3)), 0.0);
}

TEST(Bilinear, ZeroOperand)
{
    gen::Engine eng(5);
    const ShellModel m = goy();
    const ShellState v = gen::state(eng, m);
    EXPECT_EQ(m.bilinear(m.zero(), v), m.zero());
    EXPECT_EQ(m.bilinear(v, m.zero()), m.zero());
}

TEST(Bilinear, TruncationIgnoresOutOfRangeShells)
{
    // Top shell interacts only downward: B(e_m, e_m) involves no shell beyond m.
    const ShellModel m = goy();
    const ShellState r = m.bilinear(e(8, 8), e(8, 7));
    EXPECT_TRUE(r.all_finite());
    EXPECT_EQ(r(8), cplx(0.0));
}

TEST(Property, BilinearityBothSlots)
{
    gen::Engine eng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const ShellModel m(gen::model_params(eng, 3 + static_cast<int>(eng() % 20)));
        const ShellState u = gen::state(eng, m), u2 = gen::state(eng, m), v = gen::state(eng, m);
        const double al = gen::uniform(eng, -3, 3), be = gen::uniform(eng, -3, 3);
        const ShellState lhs1 = m.bilinear(al * u + be * u2, v);
        const ShellState rhs1 = al * m.bilinear(u, v) + be * m.bilinear(u2, v);
        const ShellState lhs2 = m.bilinear(v, al * u + be * u2);
        const ShellState rhs2 = al * m.bilinear(v, u) + be * m.bilinear(v, u2);
        const double s1 = std::sqrt(squared_norm(rhs1)) + std::sqrt(squared_norm(lhs1)) + 1e-300;
        const double s2 = std::sqrt(squared_norm(rhs2)) + std::sqrt(squared_norm(lhs2)) + 1e-300;
        ASSERT_LE(std::sqrt(squared_norm(lhs1 - rhs1)) / s1, 1e-13) << "trial " << trial;
        ASSERT_LE(std::sqrt(squared_norm(lhs2 - rhs2)) / s2, 1e-13) << "trial " << trial;
    }
}

TEST(Property, AntisymmetryAndEnergyFlux)
{
    gen::Engine eng(13);
    for (int trial = 0; trial < 500; ++trial) {
        const ShellModel m(gen::model_params(eng, 3 + static_cast<int>(eng() % 40)));
        const auto r = m.identity_report(gen::state(eng, m), gen::state(eng, m), gen::state(eng, m));
        ASSERT_LE(r.antisymmetry_relative(), 1e-12) << "trial " << trial;
        ASSERT_LE(r.energy_flux_relative(), 1e-12) << "trial " << trial;
    }
}

TEST(Property, EnstrophyFluxIffCoefficientCondition)
{
    gen::Engine eng(17);
    for (Variant var : {Variant::GOY, Variant::Sabra})
        for (int trial = 0; trial < 200; ++trial) {
            ModelParams p;
            p.variant = var;
            p.mu = gen::uniform(eng, 1.3, 3.0);
            p.a = gen::uniform(eng, 0.2, 2.0);
            p.b = -p.a * (1 + p.mu * p.mu) / (p.mu * p.mu);
            p.k0 = gen::log_uniform(eng, 0.2, 2.0);
            p.m = 3 + static_cast<int>(eng() % 30);
            const ShellModel m(p);
            ASSERT_TRUE(p.enstrophy_exact());
            const auto r = m.identity_report(gen::state(eng, m), gen::state(eng, m), gen::state(eng, m));
            ASSERT_LE(r.enstrophy_flux_relative(), 1e-10) << "trial " << trial;
        }
}

// Witness state u = e1 + e2 + i e3 with b = 0. The oracle evaluates the four-term
// formula directly on padded arrays; by hand r3 = -k0^3 mu^4 (a + b mu^2 - (a + b) mu^4) = 240.
TEST(Enstrophy, WitnessDefectWhenConditionFails)
{
    const ShellModel m = goy(1.0, 0.0, 8);
    ShellState u(8);
    u(1) = 1.0;
    u(2) = 1.0;
    u(3) = cplx(0, 1);
    const double flux = inner_h(m.quadratic(u), m.apply_fractional_A(u, 1.0));
    const auto Bo = oracle_B(Variant::GOY, 1.0, 0.0, 1.0, 2.0, u, u);
    double oracle = 0.0;
    for (int n = 1; n <= 8; ++n) oracle += std::pow(m.k(n), 2) * (Bo[n - 1] * std::conj(u(n))).real();
    EXPECT_NEAR(flux, oracle, 1e-12 * 240);
    EXPECT_NEAR(flux, 240.0, 1e-12 * 240);
    EXPECT_GT(m.identity_report(u, u, u).enstrophy_flux_relative(), 0.1);

    // The spec-literal all-real witness has vanishing flux (purely imaginary B against real u).
    u(3) = 1.0;
    EXPECT_NEAR(inner_h(m.quadratic(u), m.apply_fractional_A(u, 1.0)), 0.0, 1e-12);
}

TEST(Bilinear, MatchesDirectFormulaOracle)
{
    gen::Engine eng(31);
    for (int trial = 0; trial < 300; ++trial) {
        const ModelParams p = gen::model_params(eng, 3 + static_cast<int>(eng() % 25));
        const ShellModel m(p);
        const ShellState u = gen::state(eng, m), v = gen::state(eng, m);
        const ShellState r = m.bilinear(u, v);
        const auto o = oracle_B(p.variant, p.a, p.b, p.k0, p.mu, u, v);
        double err = 0, sc = 0;
        for (int n = 1; n <= p.m; ++n) {
            err = std::max(err, std::abs(r(n) - o[n - 1]));
            sc = std::max(sc, std::abs(o[n - 1]));
        }
        ASSERT_LE(err, 1e-13 * (sc + 1e-300)) << "trial " << trial;
    }
}

TEST(Property, InterpolationInequality)
{
    gen::Engine eng(19);
    for (int trial = 0; trial < 500; ++trial) {
        const ShellModel m(gen::model_params(eng, 3 + static_cast<int>(eng() % 40)));
        const ShellState u = gen::state(eng, m);
        const double H = m.calH_norm(u);
        ASSERT_LE(H * H, m.h_norm(u) * m.v_norm(u) * (1 + 1e-12)) << "trial " << trial;
        EXPECT_NEAR(m.norm_alpha(u, 0.25), H, 1e-12 * (1 + H));
        EXPECT_NEAR(m.norm_alpha(u, 0.5), m.v_norm(u), 1e-12 * (1 + m.v_norm(u)));
    }
}

TEST(Property, NormLadderMonotone)
{
    gen::Engine eng(23);
    for (int trial = 0; trial < 500; ++trial) {
        const ShellModel m(gen::model_params(eng, 3 + static_cast<int>(eng() % 30)));
        const ShellState u = gen::state(eng, m);
        double a = gen::uniform(eng, 0, 0.5), b = gen::uniform(eng, 0, 0.5);
        if (a > b) std::swap(a, b);
        const double c = std::pow(m.params().k0, 2 * (a - b));
        ASSERT_LE(m.norm_alpha(u, a), c * m.norm_alpha(u, b) * (1 + 1e-12)) << "trial " << trial;
    }
}

TEST(Adjoint, BilinearTransposes)
{
    gen::Engine eng(29);
    for (int trial = 0; trial < 100; ++trial) {
        const ShellModel m(gen::model_params(eng, 3 + static_cast<int>(eng() % 20)));
        const ShellState u = gen::state(eng, m), v = gen::state(eng, m), d = gen::state(eng, m), l = gen::state(eng, m);
        const double s1 = inner_h(m.bilinear(d, v), l), t1 = inner_h(d, m.bilinear_adjoint_first(v, l));
        const double s2 = inner_h(m.bilinear(u, d), l), t2 = inner_h(d, m.bilinear_adjoint_second(u, l));
        const double sc = (std::sqrt(squared_norm(d)) * std::sqrt(squared_norm(l)) + 1e-300) *
                          (m.v_norm(u) + m.v_norm(v)) * m.k(m.m());
        ASSERT_LE(std::abs(s1 - t1) / sc, 1e-13);
        ASSERT_LE(std::abs(s2 - t2) / sc, 1e-13);
    }
}

TEST(OperatorBound, BoundedAcrossTruncations)
{
    std::vector<double> c;
    for (int m : {8, 16, 32, 64}) c.push_back(operator_bound_estimate(goy(1.0, -1.25, m), 2, 7));
    for (double v : c) EXPECT_TRUE(std::isfinite(v) && v > 0);
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LT(std::abs(c[i] / c[i - 1] - 1.0), 0.1) << i;
}
