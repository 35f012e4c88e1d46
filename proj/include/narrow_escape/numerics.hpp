#pragma once

// Shared numerical primitives: the complete elliptic integral K, Legendre
// polynomials, Gauss-Legendre rules (plain and geometrically graded), and the
// Abel transform pair on a spherical cap used by the Collins reduction.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <utility>
#include <vector>

#include <boost/math/differentiation/autodiff.hpp>

#include "narrow_escape/common.hpp"

namespace narrow_escape {

/// Complete elliptic integral of the first kind, K(e) = ∫₀^{π/2} dθ/√(1 − e² sin²θ),
/// parameterized by the eccentricity (modulus) e. Computed with the
/// arithmetic-geometric mean, K(e) = π / (2 AGM(1, √(1 − e²))).
inline double elliptic_K(double e) {
  if (!(e >= 0.0 && e <= 1.0)) throw DomainError("elliptic_K: eccentricity must lie in [0, 1)");
  if (e == 1.0) throw DivergenceError("elliptic_K: K(e) diverges at e = 1");
  double a = 1.0;
  double b = std::sqrt((1.0 - e) * (1.0 + e));
  for (int it = 0; it < 64 && std::abs(a - b) > 4.0 * std::numeric_limits<double>::epsilon() * a;
       ++it) {
    const double mean = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = mean;
  }
  return pi / (a + b);
}

inline double legendre_P(int n, double x) {
  detail::require(n >= 0, "legendre_P: degree must be nonnegative");
  detail::require(std::abs(x) <= 1.0, "legendre_P: argument must lie in [-1, 1]");
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0) * x * cur - k * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

/// P_0(x) .. P_nmax(x) by the three-term recurrence.
inline std::vector<double> legendre_P_all(int n_max, double x) {
  detail::require(n_max >= 0, "legendre_P_all: degree must be nonnegative");
  detail::require(std::abs(x) <= 1.0, "legendre_P_all: argument must lie in [-1, 1]");
  std::vector<double> p(static_cast<std::size_t>(n_max) + 1);
  p[0] = 1.0;
  if (n_max >= 1) p[1] = x;
  for (int k = 1; k < n_max; ++k) {
    p[k + 1] = ((2.0 * k + 1.0) * x * p[k] - k * p[k - 1]) / (k + 1.0);
  }
  return p;
}

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  double lower = 0.0;
  double upper = 0.0;

  std::size_t size() const { return nodes.size(); }

  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }

  /// The same rule mapped affinely onto [a, b].
  QuadratureRule rescaled(double a, double b) const {
    QuadratureRule out;
    out.lower = a;
    out.upper = b;
    out.nodes.reserve(nodes.size());
    out.weights.reserve(weights.size());
    const double scale = (b - a) / (upper - lower);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      out.nodes.push_back(a + (nodes[i] - lower) * scale);
      out.weights.push_back(weights[i] * scale);
    }
    return out;
  }
};

/// n-point Gauss-Legendre rule on [a, b]; exact for polynomials of degree 2n - 1.
inline QuadratureRule gauss_rule(int n, double a, double b) {
  detail::require(n >= 1, "gauss_rule: need at least one point");
  detail::require(a < b, "gauss_rule: need a < b");
  QuadratureRule rule;
  rule.lower = a;
  rule.upper = b;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Newton iteration on P_n from the Tricomi-style initial guess.
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = z;
      for (int k = 1; k < n; ++k) {
        const double p2 = ((2.0 * k + 1.0) * z * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute the derivative at the converged root for the weight.
    double p0 = 1.0;
    double p1 = z;
    for (int k = 1; k < n; ++k) {
      const double p2 = ((2.0 * k + 1.0) * z * p1 - k * p0) / (k + 1.0);
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = mid - half * z;
    rule.nodes[n - 1 - i] = mid + half * z;
    rule.weights[i] = half * w;
    rule.weights[n - 1 - i] = half * w;
  }
  if (n % 2 == 1) rule.nodes[m - 1] = mid;
  return rule;
}

enum class Grading { left, right, both };

/// Composite Gauss-Legendre rule with panels shrinking geometrically (factor
/// `ratio`) toward the chosen end(s). Integrates endpoint singularities of log or
/// inverse-power type to near machine precision with a modest node count.
inline QuadratureRule graded_rule(double a, double b, Grading grading, int points_per_panel = 12,
                                  int levels = 22, double ratio = 0.15) {
  detail::require(a < b, "graded_rule: need a < b");
  detail::require(points_per_panel >= 1 && levels >= 0, "graded_rule: invalid panel layout");
  detail::require(ratio > 0.0 && ratio < 1.0, "graded_rule: ratio must lie in (0, 1)");

  // Breakpoints graded toward an end point. Panels narrower than the floating
  // point resolution at that end point would put nodes on top of it, so the
  // grading stops there.
  auto graded_offsets = [&](double length, double anchor) {
    const double floor = 1e4 * std::numeric_limits<double>::epsilon() * std::abs(anchor);
    std::vector<double> offsets{0.0};
    for (int k = levels; k >= 1; --k) {
      const double d = length * std::pow(ratio, k);
      if (d > floor) offsets.push_back(d);
    }
    offsets.push_back(length);
    return offsets;
  };

  std::vector<double> breaks;
  switch (grading) {
    case Grading::left:
      for (double d : graded_offsets(b - a, a)) breaks.push_back(a + d);
      break;
    case Grading::right: {
      const auto offsets = graded_offsets(b - a, b);
      for (auto it = offsets.rbegin(); it != offsets.rend(); ++it) breaks.push_back(b - *it);
      break;
    }
    case Grading::both: {
      const double mid = 0.5 * (a + b);
      for (double d : graded_offsets(mid - a, a)) breaks.push_back(a + d);
      const auto offsets = graded_offsets(b - mid, b);
      for (auto it = offsets.rbegin() + 1; it != offsets.rend(); ++it) breaks.push_back(b - *it);
      break;
    }
  }
  breaks.front() = a;
  breaks.back() = b;

  const QuadratureRule ref = gauss_rule(points_per_panel, -1.0, 1.0);
  QuadratureRule rule;
  rule.lower = a;
  rule.upper = b;
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    if (!(breaks[p + 1] > breaks[p])) continue;  // panel collapsed below resolution
    const QuadratureRule panel = ref.rescaled(breaks[p], breaks[p + 1]);
    for (std::size_t i = 0; i < panel.size(); ++i) {
      if (!rule.nodes.empty() && panel.nodes[i] <= rule.nodes.back()) continue;
      rule.nodes.push_back(panel.nodes[i]);
      rule.weights.push_back(panel.weights[i]);
    }
  }
  return rule;
}

// ---------------------------------------------------------------------------
// Abel transform pair on [0, eps]
//
//   H(u) = (1/2π) ∫_u^eps h(α) sin α dα / √(cos u − cos α)
//   h(θ) = −(2/sin θ) d/dθ ∫_θ^eps H(u) sin u du / √(cos θ − cos u)
//
// Both integrals are evaluated after substitutions that remove the inverse
// square-root endpoint singularity, written in half-angle form so small caps
// keep full relative precision.

/// Forward transform. `u` may be a double or a boost autodiff `fvar`, in which
/// case `h` must accept the same type; this is what lets `abel_invert` obtain
/// exact derivatives of a composed forward transform.
template <class Fn, class T = double>
T abel_forward(Fn&& h, double eps, T u, int n_points = 64) {
  using std::asin;
  using std::sin;
  using std::sqrt;
  detail::require(eps > 0.0 && eps < pi, "abel_forward: cap angle must lie in (0, pi)");
  const double uv = detail::value_of(u);
  detail::require(uv >= 0.0, "abel_forward: evaluation point must be nonnegative");
  detail::require(uv <= eps, "abel_forward: evaluation point exceeds the cap angle");
  if (uv == eps) return T(0.0);

  // sin²(α/2) = σ² + (S² − σ²) s², s ∈ [0, 1] turns the integrand smooth:
  // sin α dα / √(cos u − cos α) = 2√2 √(S² − σ²) ds.
  const double big = std::sin(0.5 * eps);
  const T sigma = sin(u / 2.0);
  const T span = big * big - sigma * sigma;
  const QuadratureRule rule = gauss_rule(n_points, 0.0, 1.0);
  T acc = T(0.0);
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double s = rule.nodes[k];
    const T alpha = 2.0 * asin(sqrt(sigma * sigma + span * (s * s)));
    acc += rule.weights[k] * h(alpha);
  }
  return (std::numbers::sqrt2 / pi) * sqrt(span) * acc;
}

/// Inverse transform given H and its derivative dH (both callables on doubles).
template <class Fn, class DFn>
  requires std::invocable<DFn&, double>
double abel_invert(Fn&& H, DFn&& dH, double eps, double theta, int n_points = 64) {
  detail::require(eps > 0.0 && eps < pi, "abel_invert: cap angle must lie in (0, pi)");
  detail::require(theta > 0.0 && theta < eps, "abel_invert: theta must lie in (0, eps)");

  // With X = cos θ, ξ = cos u, ξ_ε = cos ε the transform is h = 2 F'(X),
  // F(X) = ∫_{ξ_ε}^X H dξ/√(X − ξ). Substituting ξ = ξ_ε + L sin²φ (L = X − ξ_ε)
  // and differentiating under the integral gives
  //   F'(X) = ∫₀^{π/2} [ H̃'(ξ) 2√L sin³φ + H(ξ) sinφ/√L ] dφ,  H̃' = −H'(u)/sin u,
  // whose integrand stays bounded even when H has a √(ξ − ξ_ε) component.
  const double big = std::sin(0.5 * eps);
  const double small = std::sin(0.5 * theta);
  const double gap = (big - small) * (big + small);
  const double len = 2.0 * gap;
  const double root_len = std::sqrt(len);
  const QuadratureRule rule = gauss_rule(n_points, 0.0, 0.5 * pi);
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double phi = rule.nodes[k];
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    const double u = 2.0 * std::asin(std::sqrt(small * small + gap * c * c));
    const double value = H(u);
    const double slope = dH(u);
    acc += rule.weights[k] * (-slope / std::sin(u) * 2.0 * root_len * s * s * s + value * s / root_len);
  }
  return 2.0 * acc;
}

/// Inverse transform; the derivative of H is taken by forward-mode automatic
/// differentiation, so H must be callable with boost autodiff variables.
template <class Fn>
double abel_invert(Fn&& H, double eps, double theta, int n_points = 64) {
  namespace ad = boost::math::differentiation;
  auto value = [&](double u) { return detail::value_of(H(u)); };
  auto slope = [&](double u) {
    const auto y = H(ad::make_fvar<double, 1>(u));
    return static_cast<double>(y.derivative(1));
  };
  return abel_invert(value, slope, eps, theta, n_points);
}

/// Sampled Abel pair: H on a u-grid of [0, eps] and the reconstructed h on a
/// θ-grid of (0, eps).
struct AbelPair {
  double epsilon = 0.0;
  std::vector<double> u_grid;
  std::vector<double> forward;
  std::vector<double> theta_grid;
  std::vector<double> inverse;
};

/// Samples H = forward(h) on `n_grid` points and reconstructs h = invert(H) on
/// interior points. `h` must be generic over the autodiff scalar type.
template <class Fn>
AbelPair make_abel_pair(Fn&& h, double eps, int n_grid, int n_points = 64) {
  detail::require(n_grid >= 2, "make_abel_pair: need at least two grid points");
  AbelPair pair;
  pair.epsilon = eps;
  auto H = [&](auto u) { return abel_forward(h, eps, u, n_points); };
  for (int i = 0; i < n_grid; ++i) {
    const double u = std::min(eps, eps * i / (n_grid - 1));  // rounding must not step past eps
    pair.u_grid.push_back(u);
    pair.forward.push_back(H(u));
  }
  for (int i = 1; i <= n_grid; ++i) {
    const double theta = eps * i / (n_grid + 1);
    pair.theta_grid.push_back(theta);
    pair.inverse.push_back(abel_invert(H, eps, theta, n_points));
  }
  return pair;
}

}  // namespace narrow_escape
