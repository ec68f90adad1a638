#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "shellldp/errors.hpp"
#include "shellldp/shell_vector.hpp"

namespace shellldp {

enum class Variant { GOY, Sabra };

inline const char* to_string(Variant v) noexcept { return v == Variant::GOY ? "GOY" : "Sabra"; }

struct ModelParams {
    Variant variant = Variant::GOY;
    double a = 1.0;
    double b = -1.25;
    double mu = 2.0;
    double k0 = 1.0;
    int m = 8;

    void validate() const
    {
        detail::require(std::isfinite(mu) && mu > 1.0, "model.mu must be > 1");
        detail::require(std::isfinite(k0) && k0 > 0.0, "model.k0 must be > 0");
        detail::require(m >= 3, "model.m must be >= 3");
        detail::require(std::isfinite(a) && std::isfinite(b), "model.a and model.b must be finite");
    }

    /// a(1 + mu^2) + b mu^2; zero exactly when B conserves enstrophy.
    double enstrophy_defect() const noexcept { return a * (1.0 + mu * mu) + b * mu * mu; }

    bool enstrophy_exact() const noexcept
    {
        const double scale = std::abs(a) * (1.0 + mu * mu) + std::abs(b) * mu * mu;
        return std::abs(enstrophy_defect()) <= 1e-14 * scale;
    }
};

/// k_n = k0 mu^n for 1 <= n <= m + 2.
inline double wavenumber(const ModelParams& p, int n)
{
    detail::require(n >= 1 && n <= p.m + 2, "wavenumber: shell index out of range");
    return p.k0 * std::pow(p.mu, n);
}

struct NormLadder {
    double h_norm = 0.0;     // |u|
    double v_norm = 0.0;     // ||u||
    double calH_norm = 0.0;  // ||u||_{1/4}
    double alpha = 0.0;
    double alpha_norm = 0.0; // ||u||_alpha
};

/// Residuals of the algebraic identities of B, each with the roundoff scale it should be
/// compared against (sum of absolute values of every participating product).
struct IdentityReport {
    double antisymmetry = 0.0;       // <B(u,v),w> + (B(u,w),v)
    double antisymmetry_scale = 0.0;
    double energy_flux = 0.0;        // (B(u,u),u)
    double energy_flux_scale = 0.0;
    double enstrophy_flux = 0.0;     // (B(u,u),Au)
    double enstrophy_flux_scale = 0.0;
    double operator_ratio = 0.0;     // ||B(u,v)|| / (||u|| ||v||)
    bool enstrophy_exact = false;

    static double relative(double r, double scale) noexcept { return scale > 0.0 ? std::abs(r) / scale : std::abs(r); }
    double antisymmetry_relative() const noexcept { return relative(antisymmetry, antisymmetry_scale); }
    double energy_flux_relative() const noexcept { return relative(energy_flux, energy_flux_scale); }
    double enstrophy_flux_relative() const noexcept { return relative(enstrophy_flux, enstrophy_flux_scale); }
};

/// Shell-model geometry: wavenumbers, fractional powers of A, the norm ladder and the
/// bilinear operator B of the configured variant. Immutable after construction.
class ShellModel {
public:
    explicit ShellModel(ModelParams p) : p_(p)
    {
        p_.validate();
        k_.resize(static_cast<std::size_t>(p_.m) + 3);
        for (int n = 0; n <= p_.m + 2; ++n) k_[static_cast<std::size_t>(n)] = p_.k0 * std::pow(p_.mu, n);
        build_terms();
    }

    const ModelParams& params() const noexcept { return p_; }
    int m() const noexcept { return p_.m; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(p_.m); }

    /// k_n, 0 <= n <= m + 2 (unchecked; k_0 = k0 is used only for norm comparisons).
    double k(int n) const noexcept { return k_[static_cast<std::size_t>(n)]; }
    double wavenumber(int n) const { return shellldp::wavenumber(p_, n); }

    ShellState zero() const { return ShellState(dim()); }

    ShellState apply_fractional_A(const ShellState& u, double alpha) const
    {
        check_dim(u);
        detail::require(std::isfinite(alpha) && alpha >= 0.0, "apply_fractional_A: alpha must be finite and >= 0");
        ShellState r(u);
        if (alpha == 0.0) return r;
        for (int n = 1; n <= p_.m; ++n) r(n) *= std::pow(k(n), 2.0 * alpha);
        return r;
    }

    /// sqrt(sum k_n^{4 alpha} |u_n|^2). alpha > 1/2 is allowed as a probe outside the ladder.
    double norm_alpha(const ShellState& u, double alpha) const
    {
        check_dim(u);
        detail::require(std::isfinite(alpha) && alpha >= 0.0, "norm_alpha: alpha must be finite and >= 0");
        double s = 0.0;
        for (int n = 1; n <= p_.m; ++n) s += std::pow(k(n), 4.0 * alpha) * std::norm(u(n));
        return std::sqrt(s);
    }

    double h_norm(const ShellState& u) const { return norm_alpha(u, 0.0); }
    double v_norm(const ShellState& u) const
    {
        check_dim(u);
        double s = 0.0;
        for (int n = 1; n <= p_.m; ++n) s += k(n) * k(n) * std::norm(u(n));
        return std::sqrt(s);
    }
    double calH_norm(const ShellState& u) const
    {
        check_dim(u);
        double s = 0.0;
        for (int n = 1; n <= p_.m; ++n) s += k(n) * std::norm(u(n));
        return std::sqrt(s);
    }
    /// |Au|
    double A_norm(const ShellState& u) const
    {
        check_dim(u);
        double s = 0.0;
        for (int n = 1; n <= p_.m; ++n) s += std::pow(k(n), 4) * std::norm(u(n));
        return std::sqrt(s);
    }

    NormLadder norm_ladder(const ShellState& u, double alpha) const
    {
        return {h_norm(u), v_norm(u), calH_norm(u), alpha, norm_alpha(u, alpha)};
    }

    /// B(u, v) for the configured variant with u_{-1} = u_0 = u_{m+1} = u_{m+2} = 0.
    ShellState bilinear(const ShellState& u, const ShellState& v) const
    {
        check_dim(u);
        check_dim(v);
        ShellState r(dim());
        for (const auto& t : terms_) r[t.n] += t.coef * pick(u[t.i], t.conj_i) * pick(v[t.j], t.conj_j);
        return r;
    }

    ShellState quadratic(const ShellState& u) const { return bilinear(u, u); }

    /// Componentwise sum of |coef| |u_i| |v_j| over the products forming B(u,v)_n.
    std::vector<double> bilinear_abs(const ShellState& u, const ShellState& v) const
    {
        check_dim(u);
        check_dim(v);
        std::vector<double> r(dim(), 0.0);
        for (const auto& t : terms_) r[t.n] += std::abs(t.coef) * std::abs(u[t.i]) * std::abs(v[t.j]);
        return r;
    }

    /// y with (B(d, v), lambda) = (d, y) for all d.
    ShellState bilinear_adjoint_first(const ShellState& v, const ShellState& lambda) const
    {
        ShellState y(dim());
        for (const auto& t : terms_) {
            const cplx alpha = t.coef * pick(v[t.j], t.conj_j);
            y[t.i] += t.conj_i ? alpha * std::conj(lambda[t.n]) : std::conj(alpha) * lambda[t.n];
        }
        return y;
    }

    /// y with (B(u, d), lambda) = (d, y) for all d.
    ShellState bilinear_adjoint_second(const ShellState& u, const ShellState& lambda) const
    {
        ShellState y(dim());
        for (const auto& t : terms_) {
            const cplx alpha = t.coef * pick(u[t.i], t.conj_i);
            y[t.j] += t.conj_j ? alpha * std::conj(lambda[t.n]) : std::conj(alpha) * lambda[t.n];
        }
        return y;
    }

    /// Transpose of the Jacobian of u -> B(u,u), applied to lambda.
    ShellState quadratic_vjp(const ShellState& u, const ShellState& lambda) const
    {
        ShellState y = bilinear_adjoint_first(u, lambda);
        y += bilinear_adjoint_second(u, lambda);
        return y;
    }

    /// Gershgorin bound on the Jacobian of u -> B(u,u); the explicit step guard uses c / rate.
    double stiffness_rate(const ShellState& u) const
    {
        std::vector<double> row(dim(), 0.0);
        for (const auto& t : terms_) row[t.n] += std::abs(t.coef) * (std::abs(u[t.i]) + std::abs(u[t.j]));
        return row.empty() ? 0.0 : *std::max_element(row.begin(), row.end());
    }

    IdentityReport identity_report(const ShellState& u, const ShellState& v, const ShellState& w) const
    {
        IdentityReport r;
        r.enstrophy_exact = p_.enstrophy_exact();

        const ShellState Buv = bilinear(u, v);
        const ShellState Buw = bilinear(u, w);
        r.antisymmetry = duality_pair(Buv, w) + inner_h(Buw, v);
        r.antisymmetry_scale = weighted_abs(bilinear_abs(u, v), w) + weighted_abs(bilinear_abs(u, w), v);

        const ShellState Buu = quadratic(u);
        const auto Buu_abs = bilinear_abs(u, u);
        r.energy_flux = inner_h(Buu, u);
        r.energy_flux_scale = weighted_abs(Buu_abs, u);

        const ShellState Au = apply_fractional_A(u, 1.0);
        r.enstrophy_flux = inner_h(Buu, Au);
        r.enstrophy_flux_scale = weighted_abs(Buu_abs, Au);

        const double denom = v_norm(u) * v_norm(v);
        r.operator_ratio = denom > 0.0 ? v_norm(Buv) / denom : 0.0;
        return r;
    }

    void check_dim(const ShellState& u) const
    {
        detail::require(u.size() == dim(), "shell state dimension does not match the model truncation");
    }

private:
    struct Term {
        std::size_t n, i, j; // 0-based output and operand slots
        cplx coef;
        bool conj_i, conj_j;
    };

    static cplx pick(cplx z, bool conjugate) noexcept { return conjugate ? std::conj(z) : z; }

    static double weighted_abs(const std::vector<double>& a, const ShellState& w)
    {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * std::abs(w[i]);
        return s;
    }

    // B(u,v)_n = sum over terms coef * [conj] u_i * [conj] v_j; operands outside 1..m vanish.
    void build_terms()
    {
        const cplx mi(0.0, -1.0);
        const double a = p_.a, b = p_.b;
        const bool goy = p_.variant == Variant::GOY;
        auto add = [&](int n, int i, int j, cplx coef, bool ci, bool cj) {
            if (i < 1 || i > p_.m || j < 1 || j > p_.m || coef == cplx(0.0)) return;
            terms_.push_back({static_cast<std::size_t>(n - 1), static_cast<std::size_t>(i - 1),
                              static_cast<std::size_t>(j - 1), coef, ci, cj});
        };
        for (int n = 1; n <= p_.m; ++n) {
            if (goy) {
                add(n, n + 1, n + 2, mi * a * k(n + 1), true, true);
                add(n, n - 1, n + 1, mi * b * k(n), true, true);
                add(n, n - 1, n - 2, -mi * a * k(std::max(n - 1, 0)), true, true);
                add(n, n - 2, n - 1, -mi * b * k(std::max(n - 1, 0)), true, true);
            } else {
                add(n, n + 1, n + 2, mi * a * k(n + 1), true, false);
                add(n, n - 1, n + 1, mi * b * k(n), true, false);
                add(n, n - 1, n - 2, mi * a * k(std::max(n - 1, 0)), false, false);
                add(n, n - 2, n - 1, mi * b * k(std::max(n - 1, 0)), false, false);
            }
        }
    }

    ModelParams p_;
    std::vector<double> k_;
    std::vector<Term> terms_;
};

/// Lower estimate of sup ||B(u,v)|| / (||u|| ||v||): alternating power iteration on the
/// real-linear maps v -> B(u,v) and u -> B(u,v) in V coordinates, from random starts.
inline double operator_bound_estimate(const ShellModel& model, int restarts, std::uint64_t seed,
                                      int rounds = 12, int power_iterations = 60)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    const int m = model.m();
    auto random_state = [&] {
        ShellState s(model.dim());
        for (int n = 1; n <= m; ++n) s(n) = cplx(gauss(rng), gauss(rng)) / model.k(n);
        return s;
    };
    auto normalize_v = [&](ShellState& s) {
        const double nv = model.v_norm(s);
        if (nv > 0.0) s *= 1.0 / nv;
    };
    auto to_v = [&](ShellState s) { // x -> K^{-1} x
        for (int n = 1; n <= m; ++n) s(n) /= model.k(n);
        return s;
    };
    auto to_x = [&](ShellState s) { // v -> K v
        for (int n = 1; n <= m; ++n) s(n) *= model.k(n);
        return s;
    };

    // Maximises ||L d|| / ||d|| over d by power iteration on M^T M with M = K L K^{-1}.
    auto maximise = [&](ShellState d, auto&& apply, auto&& adjoint) {
        normalize_v(d);
        ShellState x = to_x(d);
        double sigma = 0.0;
        for (int it = 0; it < power_iterations; ++it) {
            const ShellState y = to_x(apply(to_v(x)));
            sigma = std::sqrt(squared_norm(y));
            ShellState z = to_v(adjoint(to_x(y)));
            const double nz = std::sqrt(squared_norm(z));
            if (nz == 0.0) break;
            x = (1.0 / nz) * z;
        }
        ShellState best = to_v(x);
        return std::pair{best, sigma};
    };

    double best = 0.0;
    for (int r = 0; r < restarts; ++r) {
        ShellState u = random_state(), v = random_state();
        normalize_v(u);
        for (int round = 0; round < rounds; ++round) {
            auto [vn, sv] = maximise(
                v, [&](const ShellState& d) { return model.bilinear(u, d); },
                [&](const ShellState& l) { return model.bilinear_adjoint_second(u, l); });
            v = vn;
            auto [un, su] = maximise(
                u, [&](const ShellState& d) { return model.bilinear(d, v); },
                [&](const ShellState& l) { return model.bilinear_adjoint_first(v, l); });
            u = un;
            best = std::max({best, sv, su});
        }
    }
    return best;
}

} // namespace shellldp
