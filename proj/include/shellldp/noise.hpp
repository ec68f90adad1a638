#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "shellldp/errors.hpp"
#include "shellldp/random.hpp"
#include "shellldp/shell_vector.hpp"

namespace shellldp {

/// Eigenvalues q_j of the trace-class covariance Q, diagonal in the shell basis.
struct CovarianceSpec {
    std::vector<double> q;

    std::size_t dim() const noexcept { return q.size(); }

    void validate() const
    {
        detail::require(!q.empty(), "covariance.q must not be empty");
        for (double v : q) detail::require(std::isfinite(v) && v > 0.0, "covariance.q entries must be finite and > 0");
    }

    double trace() const noexcept
    {
        double s = 0.0;
        for (double v : q) s += v;
        return s;
    }
};

/// |h|_0 = |Q^{-1/2} h|.
inline double rkhs_norm(const RkhsVector& h, const CovarianceSpec& cov)
{
    detail::require(h.size() == cov.dim(), "rkhs_norm: dimension mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) {
        detail::require(cov.q[j] > 0.0, "rkhs_norm: q_j must be > 0");
        s += std::norm(h[j]) / cov.q[j];
    }
    return std::sqrt(s);
}

/// (g, h)_0 = (Q^{-1/2} g, Q^{-1/2} h).
inline double rkhs_inner(const RkhsVector& g, const RkhsVector& h, const CovarianceSpec& cov)
{
    detail::require(g.size() == cov.dim() && h.size() == cov.dim(), "rkhs_inner: dimension mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j)
        s += (g[j].real() * h[j].real() + g[j].imag() * h[j].imag()) / cov.q[j];
    return s;
}

/// Q^{1/2} x, an element of H0 with |Q^{1/2} x|_0 = |x|.
inline RkhsVector sqrt_q_apply(const CovarianceSpec& cov, const ShellState& x)
{
    detail::require(x.size() == cov.dim(), "sqrt_q_apply: dimension mismatch");
    RkhsVector h(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) h[j] = std::sqrt(cov.q[j]) * x[j];
    return h;
}

/// Dense m x m complex operator H0 -> H in shell coordinates, 1-based (row, col).
class ShellMatrix {
public:
    explicit ShellMatrix(std::size_t m) : m_(m), a_(m * m) {}

    static ShellMatrix identity(std::size_t m)
    {
        ShellMatrix s(m);
        for (std::size_t i = 1; i <= m; ++i) s(i, i) = 1.0;
        return s;
    }

    std::size_t dim() const noexcept { return m_; }
    cplx& operator()(std::size_t row, std::size_t col) noexcept { return a_[(row - 1) * m_ + (col - 1)]; }
    cplx operator()(std::size_t row, std::size_t col) const noexcept { return a_[(row - 1) * m_ + (col - 1)]; }

private:
    std::size_t m_;
    std::vector<cplx> a_;
};

/// |S|_{L_Q} = sqrt(tr(S Q S^*)) = sqrt(sum_{n,j} |S_nj|^2 q_j).
inline double lq_norm(const ShellMatrix& s, const CovarianceSpec& cov)
{
    detail::require(s.dim() == cov.dim(), "lq_norm: dimension mismatch");
    double acc = 0.0;
    for (std::size_t n = 1; n <= s.dim(); ++n)
        for (std::size_t j = 1; j <= s.dim(); ++j) {
            const cplx v = s(n, j);
            detail::require(std::isfinite(v.real()) && std::isfinite(v.imag()), "lq_norm: non-finite entry");
            acc += std::norm(v) * cov.q[j - 1];
        }
    return std::sqrt(acc);
}

/// Brownian increments of the Q-Wiener process on a uniform grid. H is a real Hilbert
/// space, so (W, e_j) = Re W_j and (W, i e_j) = Im W_j are independent with variance
/// q_j dt each.
class NoisePath {
public:
    NoisePath() = default;
    NoisePath(std::uint64_t seed, std::uint64_t stream, double dt, std::size_t steps, std::size_t m)
        : seed_(seed), stream_(stream), dt_(dt), steps_(steps), m_(m), inc_(steps * m)
    {
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }
    double dt() const noexcept { return dt_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t dim() const noexcept { return m_; }

    /// Increment on step k (0-based) for shell n (1-based).
    cplx increment(std::size_t step, int n) const noexcept
    {
        return inc_[step * m_ + static_cast<std::size_t>(n - 1)];
    }
    cplx& increment(std::size_t step, int n) noexcept { return inc_[step * m_ + static_cast<std::size_t>(n - 1)]; }

    /// Sums consecutive blocks of `factor` increments: the same Brownian path on a coarser grid.
    NoisePath coarsen(std::size_t factor) const
    {
        detail::require(factor >= 1 && steps_ % factor == 0, "coarsen: factor must divide the step count");
        NoisePath c(seed_, stream_, dt_ * static_cast<double>(factor), steps_ / factor, m_);
        for (std::size_t k = 0; k < c.steps_; ++k)
            for (std::size_t j = 0; j < m_; ++j) {
                cplx s = 0.0;
                for (std::size_t f = 0; f < factor; ++f) s += inc_[(k * factor + f) * m_ + j];
                c.inc_[k * m_ + j] = s;
            }
        return c;
    }

    bool operator==(const NoisePath&) const = default;

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    double dt_ = 0.0;
    std::size_t steps_ = 0;
    std::size_t m_ = 0;
    std::vector<cplx> inc_;
};

/// Samples one Q-Wiener path. Bit-exactly reproducible from (seed, stream, steps, dt, q).
inline NoisePath sample_wiener(std::uint64_t seed, std::size_t steps, double dt, const CovarianceSpec& cov,
                               std::uint64_t stream = 0)
{
    detail::require(steps >= 1, "sample_wiener: steps must be >= 1");
    detail::require(std::isfinite(dt) && dt > 0.0, "sample_wiener: dt must be > 0");
    cov.validate();
    const GaussianStream gs(seed, stream);
    NoisePath path(seed, stream, dt, steps, cov.dim());
    for (std::size_t k = 0; k < steps; ++k)
        for (std::size_t j = 0; j < cov.dim(); ++j) {
            const auto [re, im] = gs.normal_pair(static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(j));
            const double s = std::sqrt(cov.q[j] * dt);
            path.increment(k, static_cast<int>(j + 1)) = cplx(s * re, s * im);
        }
    return path;
}

/// Piecewise-constant H0-valued control on a uniform partition of [0, T].
class Control {
public:
    Control() = default;
    Control(double horizon, std::vector<RkhsVector> cells) : T_(horizon), values_(std::move(cells))
    {
        detail::require(std::isfinite(T_) && T_ > 0.0, "control horizon must be > 0");
        detail::require(!values_.empty(), "control needs at least one cell");
        for (const auto& v : values_) detail::require(v.size() == values_.front().size(), "control cells differ in dimension");
    }

    static Control zero(double horizon, std::size_t cells, std::size_t m)
    {
        return Control(horizon, std::vector<RkhsVector>(cells, RkhsVector(m)));
    }
    static Control constant(double horizon, std::size_t cells, const RkhsVector& value)
    {
        return Control(horizon, std::vector<RkhsVector>(cells, value));
    }

    double horizon() const noexcept { return T_; }
    std::size_t cells() const noexcept { return values_.size(); }
    std::size_t dim() const noexcept { return values_.empty() ? 0 : values_.front().size(); }
    double cell_width() const noexcept { return T_ / static_cast<double>(values_.size()); }

    const RkhsVector& cell(std::size_t c) const noexcept { return values_[c]; }
    RkhsVector& cell(std::size_t c) noexcept { return values_[c]; }
    const std::vector<RkhsVector>& values() const noexcept { return values_; }

    /// Cell containing integration step `step` of a uniform grid with `steps` steps.
    std::size_t cell_of_step(std::size_t step, std::size_t steps) const
    {
        detail::require(steps % values_.size() == 0, "solver steps must be a multiple of the control cell count");
        return step / (steps / values_.size());
    }

    /// Value at time t (right-continuous; t = T maps to the last cell).
    const RkhsVector& at(double t) const noexcept
    {
        auto c = static_cast<std::size_t>(std::floor(t / cell_width()));
        if (c >= values_.size()) c = values_.size() - 1;
        return values_[c];
    }

    /// 1/2 int_0^T |h(s)|_0^2 ds
    double energy(const CovarianceSpec& cov) const
    {
        double s = 0.0;
        for (const auto& v : values_) s += std::pow(rkhs_norm(v, cov), 2);
        return 0.5 * s * cell_width();
    }

    /// h in S_M iff int |h|_0^2 <= M.
    bool in_S_M(const CovarianceSpec& cov, double M) const { return 2.0 * energy(cov) <= M; }

    Control& operator*=(double s) noexcept
    {
        for (auto& v : values_) v *= s;
        return *this;
    }
    Control& operator+=(const Control& o)
    {
        detail::require(o.cells() == cells() && o.dim() == dim(), "control shape mismatch");
        for (std::size_t c = 0; c < values_.size(); ++c) values_[c] += o.values_[c];
        return *this;
    }
    Control& axpy(double s, const Control& o)
    {
        detail::require(o.cells() == cells() && o.dim() == dim(), "control shape mismatch");
        for (std::size_t c = 0; c < values_.size(); ++c) values_[c].axpy(s, o.values_[c]);
        return *this;
    }
    friend Control operator*(double s, Control h) { return h *= s; }
    friend Control operator+(Control a, const Control& b) { return a += b; }

    bool operator==(const Control&) const = default;

private:
    double T_ = 1.0;
    std::vector<RkhsVector> values_;
};

/// L^2(0,T; H0) inner product of two controls on the same grid.
inline double control_inner(const Control& g, const Control& h, const CovarianceSpec& cov)
{
    detail::require(g.cells() == h.cells() && g.dim() == h.dim(), "control shape mismatch");
    double s = 0.0;
    for (std::size_t c = 0; c < g.cells(); ++c) s += rkhs_inner(g.cell(c), h.cell(c), cov);
    return s * g.cell_width();
}

inline double control_norm(const Control& h, const CovarianceSpec& cov) { return std::sqrt(control_inner(h, h, cov)); }

} // namespace shellldp
