#pragma once

// Direct solver for the mixed problem on the ball by truncated Legendre
// series. With v = u + (R² − r²)/6 and u = Σ aₙ (r/R)ⁿ Pₙ(cos θ):
//
//   Σ aₙ Pₙ(cos θ) = 0            on the absorbing cap  0 ≤ θ < ε
//   Σ n aₙ Pₙ(cos θ) = R²/3        on the reflecting part ε < θ ≤ π
//
// The reflecting condition is imposed in integrated form,
//   Σ n aₙ (P_{n+1}(x) − P_{n−1}(x))/(2n + 1) = (R²/3)(1 + x),  x = cos θ,
// obtained by integrating from the antipode. The integrated flux is bounded
// at the rim, whereas the flux itself has an inverse square-root singularity
// that pollutes a pointwise least-squares fit by O(1). Pointwise flux rows are
// kept as well, with a weight that vanishes linearly at the rim, so the flux
// away from the window is also controlled.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "narrow_escape/common.hpp"
#include "narrow_escape/numerics.hpp"

namespace narrow_escape {

struct SpectralOptions {
  int n_check = 400;             // points per sub-interval used for the residuals
  double neumann_weight = 10.0;  // weight of the integrated reflecting rows
  double flux_weight = 100.0;    // weight of the pointwise reflecting rows (scaled by 1/N)
};

struct LegendreSeriesSolution {
  double R = 1.0;
  double eps = 0.0;
  std::vector<double> coeffs;
  double residual_dirichlet = 0.0;  // max |Σ aₙ Pₙ| on [0, ε)
  double residual_neumann = 0.0;    // max |Σ n aₙ Pₙ − R²/3| on (ε, π]
  double residual_flux = 0.0;       // max error of the integrated reflecting condition
};

namespace detail {

// Chebyshev points of (lo, hi); they cluster toward both ends with the
// inverse square-root density of the rim singularity.
inline std::vector<double> chebyshev_points(double lo, double hi, int m) {
  std::vector<double> pts(m);
  for (int k = 0; k < m; ++k) {
    const double s = 0.5 * (1.0 - std::cos(pi * (k + 0.5) / m));
    pts[k] = lo + (hi - lo) * s;
  }
  return pts;
}

inline double series_value(const std::vector<double>& a, double x) {
  const auto P = legendre_P_all(static_cast<int>(a.size()) - 1, x);
  double acc = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) acc += a[n] * P[n];
  return acc;
}

inline double series_flux(const std::vector<double>& a, double x) {
  const auto P = legendre_P_all(static_cast<int>(a.size()) - 1, x);
  double acc = 0.0;
  for (std::size_t n = 1; n < a.size(); ++n) acc += static_cast<double>(n) * a[n] * P[n];
  return acc;
}

inline double series_integrated_flux(const std::vector<double>& a, double x) {
  const int N = static_cast<int>(a.size()) - 1;
  const auto P = legendre_P_all(N + 1, x);
  double acc = 0.0;
  for (int n = 1; n <= N; ++n) acc += n * a[n] * (P[n + 1] - P[n - 1]) / (2.0 * n + 1.0);
  return acc;
}

}  // namespace detail

/// Least-squares collocation at `M` angles (half on each sub-interval) for
/// coefficients a₀ … a_N. Each reflecting angle contributes an integrated and
/// a pointwise row.
inline LegendreSeriesSolution solve_dual_series(double R, double eps, int N, int M,
                                                const SpectralOptions& opt = {}) {
  detail::require(R > 0.0, "solve_dual_series: R must be positive");
  detail::require(eps > 0.0 && eps <= pi, "solve_dual_series: eps must lie in (0, pi]");
  detail::require(N >= 16, "solve_dual_series: N must be at least 16");
  detail::require(M >= 2 * N, "solve_dual_series: M must be at least 2N");

  const bool full_cap = eps >= pi;
  const int m_dir = full_cap ? M : M / 2;
  const int m_neu = M - m_dir;
  const double rhs_scale = R * R / 3.0;

  Eigen::MatrixXd A(m_dir + 2 * m_neu, N + 1);
  Eigen::VectorXd b(m_dir + 2 * m_neu);
  int row = 0;
  for (double th : detail::chebyshev_points(0.0, eps, m_dir)) {
    const auto P = legendre_P_all(N, std::cos(th));
    for (int n = 0; n <= N; ++n) A(row, n) = P[n];
    b(row) = 0.0;
    ++row;
  }
  if (m_neu > 0) {
    for (double th : detail::chebyshev_points(eps, pi, m_neu)) {
      const double x = std::cos(th);
      const auto P = legendre_P_all(N + 1, x);
      const double w = opt.neumann_weight;
      A(row, 0) = 0.0;
      for (int n = 1; n <= N; ++n) A(row, n) = w * n * (P[n + 1] - P[n - 1]) / (2.0 * n + 1.0);
      b(row) = w * rhs_scale * (1.0 + x);
      ++row;

      const double wp = opt.flux_weight * (th - eps) / (pi - eps) / N;
      A(row, 0) = 0.0;
      for (int n = 1; n <= N; ++n) A(row, n) = wp * n * P[n];
      b(row) = wp * rhs_scale;
      ++row;
    }
  }

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < N + 1) {
    throw SolverError("solve_dual_series: collocation matrix is rank deficient (rank " +
                      std::to_string(qr.rank()) + " of " + std::to_string(N + 1) + ")");
  }
  const Eigen::VectorXd a = qr.solve(b);
  if (!a.allFinite()) throw SolverError("solve_dual_series: non-finite coefficients");

  LegendreSeriesSolution sol;
  sol.R = R;
  sol.eps = eps;
  sol.coeffs.assign(a.data(), a.data() + a.size());

  // Residuals on a fixed grid of midpoints, independent of N and M.
  const int nc = opt.n_check;
  for (int k = 0; k < nc; ++k) {
    const double th = eps * (k + 0.5) / nc;
    sol.residual_dirichlet = std::max(sol.residual_dirichlet, std::abs(detail::series_value(sol.coeffs, std::cos(th))));
  }
  if (!full_cap) {
    for (int k = 0; k < nc; ++k) {
      const double th = eps + (pi - eps) * (k + 0.5) / nc;
      const double x = std::cos(th);
      sol.residual_neumann =
          std::max(sol.residual_neumann, std::abs(detail::series_flux(sol.coeffs, x) - rhs_scale));
      sol.residual_flux = std::max(
          sol.residual_flux, std::abs(detail::series_integrated_flux(sol.coeffs, x) - rhs_scale * (1.0 + x)));
    }
  }
  return sol;
}

inline LegendreSeriesSolution solve_dual_series(double R, double eps, int N = 64) {
  return solve_dual_series(R, eps, N, 4 * N);
}

/// v(r, θ) = Σ aₙ (r/R)ⁿ Pₙ(cos θ) + (R² − r²)/6.
inline double reconstruct_mfpt(const LegendreSeriesSolution& sol, double r, double theta) {
  detail::require(r >= 0.0, "reconstruct_mfpt: r must be nonnegative");
  detail::require(r <= sol.R, "reconstruct_mfpt: r exceeds the ball radius");
  const auto P = legendre_P_all(static_cast<int>(sol.coeffs.size()) - 1, std::cos(theta));
  const double rho = r / sol.R;
  double acc = 0.0;
  double power = 1.0;
  for (std::size_t n = 0; n < sol.coeffs.size(); ++n) {
    acc += sol.coeffs[n] * power * P[n];
    power *= rho;
  }
  return acc + (sol.R * sol.R - r * r) / 6.0;
}

/// ∂u/∂r at r = R, i.e. (1/R) Σ n aₙ Pₙ(cos θ).
inline double boundary_radial_derivative(const LegendreSeriesSolution& sol, double theta) {
  return detail::series_flux(sol.coeffs, std::cos(theta)) / sol.R;
}

struct AverageMFPT {
  double analytic = 0.0;    // a₀ + R²/15
  double quadrature = 0.0;  // volume average of reconstruct_mfpt
  double center = 0.0;      // a₀ + R²/6
};

inline AverageMFPT average_mfpt(const LegendreSeriesSolution& sol) {
  detail::require(!sol.coeffs.empty(), "average_mfpt: empty solution");
  const double R = sol.R;
  AverageMFPT out;
  out.analytic = sol.coeffs[0] + R * R / 15.0;
  out.center = sol.coeffs[0] + R * R / 6.0;

  // Both rules are exact for the polynomial integrand.
  const int N = static_cast<int>(sol.coeffs.size()) - 1;
  const QuadratureRule radial = gauss_rule(N / 2 + 4, 0.0, R);
  const QuadratureRule polar = gauss_rule(N / 2 + 2, -1.0, 1.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < radial.size(); ++i) {
    const double r = radial.nodes[i];
    double shell = 0.0;
    for (std::size_t j = 0; j < polar.size(); ++j) {
      shell += polar.weights[j] * reconstruct_mfpt(sol, r, std::acos(polar.nodes[j]));
    }
    acc += radial.weights[i] * r * r * 2.0 * pi * shell;
  }
  out.quadrature = acc / (4.0 * pi * R * R * R / 3.0);
  return out;
}

}  // namespace narrow_escape
