#pragma once

#include <stdexcept>
#include <string>

namespace shellldp {

/// Precondition or argument violation (bad index, mismatched dimensions, invalid parameters).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Numerical failure at run time: blow-up, non-finite state, degenerate fit.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw DomainError(message);
}

} // namespace detail
} // namespace shellldp
