#pragma once

#include <cassert>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "shellldp/errors.hpp"

namespace shellldp {

using cplx = std::complex<double>;

/// Truncated complex shell vector (u_1, ..., u_m). Shell indices are 1-based at the
/// API (operator(), at()); operator[] and components() expose the 0-based storage.
/// The tag keeps states and control (RKHS) coefficients from mixing silently.
template <class Tag>
class ShellVector {
public:
    using value_type = cplx;

    ShellVector() = default;
    explicit ShellVector(std::size_t m) : c_(m) {}
    explicit ShellVector(std::vector<cplx> components) : c_(std::move(components)) {}

    /// value * e_n (1-based n).
    static ShellVector basis(std::size_t m, int n, cplx value = 1.0)
    {
        ShellVector v(m);
        v.at(n) = value;
        return v;
    }

    std::size_t size() const noexcept { return c_.size(); }

    cplx& operator()(int n) noexcept
    {
        assert(n >= 1 && static_cast<std::size_t>(n) <= c_.size());
        return c_[static_cast<std::size_t>(n - 1)];
    }
    cplx operator()(int n) const noexcept
    {
        assert(n >= 1 && static_cast<std::size_t>(n) <= c_.size());
        return c_[static_cast<std::size_t>(n - 1)];
    }

    cplx& at(int n)
    {
        detail::require(n >= 1 && static_cast<std::size_t>(n) <= c_.size(), "shell index out of range");
        return c_[static_cast<std::size_t>(n - 1)];
    }
    cplx at(int n) const
    {
        detail::require(n >= 1 && static_cast<std::size_t>(n) <= c_.size(), "shell index out of range");
        return c_[static_cast<std::size_t>(n - 1)];
    }

    cplx& operator[](std::size_t i) noexcept { return c_[i]; }
    cplx operator[](std::size_t i) const noexcept { return c_[i]; }

    std::span<cplx> components() noexcept { return c_; }
    std::span<const cplx> components() const noexcept { return c_; }
    const std::vector<cplx>& raw() const noexcept { return c_; }

    bool all_finite() const noexcept
    {
        for (const auto& z : c_)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        return true;
    }

    ShellVector& operator+=(const ShellVector& o)
    {
        check_same(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
        return *this;
    }
    ShellVector& operator-=(const ShellVector& o)
    {
        check_same(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
        return *this;
    }
    ShellVector& operator*=(cplx s) noexcept
    {
        for (auto& z : c_) z *= s;
        return *this;
    }
    ShellVector& operator*=(double s) noexcept
    {
        for (auto& z : c_) z *= s;
        return *this;
    }

    /// this += s * x
    ShellVector& axpy(double s, const ShellVector& x)
    {
        check_same(x);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += s * x.c_[i];
        return *this;
    }

    friend ShellVector operator+(ShellVector a, const ShellVector& b) { return a += b; }
    friend ShellVector operator-(ShellVector a, const ShellVector& b) { return a -= b; }
    friend ShellVector operator*(double s, ShellVector a) { return a *= s; }
    friend ShellVector operator*(cplx s, ShellVector a) { return a *= s; }

    bool operator==(const ShellVector&) const = default;

private:
    void check_same(const ShellVector& o) const
    {
        detail::require(o.c_.size() == c_.size(), "shell vector dimension mismatch");
    }

    std::vector<cplx> c_;
};

struct state_tag {};
struct rkhs_tag {};

using ShellState = ShellVector<state_tag>;
/// Element of H0 = Q^{1/2} H, stored in H coordinates.
using RkhsVector = ShellVector<rkhs_tag>;

/// Real inner product (u, v) = Re sum u_n conj(v_n).
template <class Tag>
double inner_h(const ShellVector<Tag>& u, const ShellVector<Tag>& v)
{
    detail::require(u.size() == v.size(), "inner_h: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i].real() * v[i].real() + u[i].imag() * v[i].imag();
    return s;
}

/// Duality <u, w>. Same arithmetic as inner_h at finite truncation.
template <class Tag>
double duality_pair(const ShellVector<Tag>& u, const ShellVector<Tag>& w)
{
    return inner_h(u, w);
}

template <class Tag>
double squared_norm(const ShellVector<Tag>& u) noexcept
{
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += std::norm(u[i]);
    return s;
}

/// Reinterpret the coefficients under another tag (explicit, never implicit).
template <class To, class From>
ShellVector<To> retag(const ShellVector<From>& v)
{
    return ShellVector<To>(v.raw());
}

} // namespace shellldp
