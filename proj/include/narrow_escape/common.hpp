#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace narrow_escape {

inline constexpr double pi = std::numbers::pi;
inline constexpr const char* version = "1.0.0";

// Input outside an operation's domain. The CLI reports these with exit code 2.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The requested quantity is infinite at the given input, e.g. K(1).
class DivergenceError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Singular or ill-posed discrete system. The CLI reports these with exit code 3.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

// Plain value of a double or of a forward-mode autodiff variable.
template <class T>
double value_of(const T& x) {
  return static_cast<double>(x);
}

}  // namespace detail
}  // namespace narrow_escape
