#pragma once

// Collins-method solution of the mixed problem on a ball of radius R whose
// boundary is absorbing on the cap θ < ε and reflecting elsewhere.
//
// The n = 0 coefficient b₀ of the Legendre expansion fixes the MFPT from the
// centre (b₀ + R²/6). It is obtained from the normalized Fredholm equation
//
//   Ĵ(u) + ∫₀^ε K(u, v) Ĵ(v) dv = M̂(u),   M̂(u) = (√2/π) ∫₀^ε K(u, v) cos(v/2) dv,
//
// followed by one scalar linear equation for b₀.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "narrow_escape/common.hpp"
#include "narrow_escape/numerics.hpp"

namespace narrow_escape {

struct CollinsConfig {
  double R = 1.0;
  double eps = 0.1;
  int n_quad = 200;
  int n_series = 1000;
  bool zero_kernel = false;  // drop K entirely: reproduces the leading-order b₀

  void validate() const {
    detail::require(R > 0.0, "collins: R must be positive");
    detail::require(eps > 0.0 && eps < pi, "collins: eps must lie in (0, pi)");
    detail::require(n_quad >= 8, "collins: n_quad must be at least 8");
    detail::require(n_series >= 100, "collins: n_series must be at least 100");
  }
};

struct CollinsSystem {
  std::vector<double> grid;
  std::vector<double> weights;
  // K(u_i, u_j) off the diagonal; the diagonal holds the singularity-corrected
  // value (D_i − Σ_{j≠i} w_j K_ij) / w_i with D_i = ∫₀^ε K(u_i, v) dv.
  Eigen::MatrixXd kernel_matrix;
  std::vector<double> rhs;
  std::vector<double> j_hat;
  double c_factor = 0.0;
  double residual = 0.0;
  std::vector<std::string> warnings;
};

struct B0Result {
  double b0 = 0.0;
  double leading = 0.0;
  double correction_factor = 1.0;  // b0 + 2R²/3 = (leading + 2R²/3) · correction_factor
  double c_factor = 0.0;
  double mfpt_center = 0.0;
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Kernel

/// (2/π) Σ_{n=1}^{N} (1/2n) cos((n+½)u) cos((n+½)v). Slowly convergent;
/// intended as an independent check of kernel_closed.
inline double kernel_series(double u, double v, int N) {
  detail::require(u >= 0.0 && u <= pi && v >= 0.0 && v <= pi, "kernel_series: angles must lie in [0, pi]");
  detail::require(u != v, "kernel_series: the series diverges on the diagonal u = v");
  detail::require(N >= 1, "kernel_series: need at least one term");
  // cos((n+½)u) cos((n+½)v) = ½[cos((n+½)(u+v)) + cos((n+½)(u−v))]
  double acc = 0.0;
  for (int n = 1; n <= N; ++n) {
    const double k = n + 0.5;
    acc += (std::cos(k * (u + v)) + std::cos(k * (u - v))) / (4.0 * n);
  }
  return 2.0 / pi * acc;
}

namespace detail {

// f(x) = −cos(x/2) log(2 sin(x/2)) + ((x − π)/2) sin(x/2), for 0 ≤ x ≤ 2π.
inline double kernel_f(double x) {
  const double s = std::sin(0.5 * x);
  return -std::cos(0.5 * x) * std::log(2.0 * std::abs(s)) + 0.5 * (x - pi) * s;
}

}  // namespace detail

/// Closed form of the kernel, K(u, v) = [f(u + v) + f(|u − v|)] / 2π.
/// Logarithmically infinite on the diagonal.
inline double kernel_closed(double u, double v) {
  detail::require(u >= 0.0 && u <= pi && v >= 0.0 && v <= pi, "kernel_closed: angles must lie in [0, pi]");
  return (detail::kernel_f(u + v) + detail::kernel_f(std::abs(u - v))) / (2.0 * pi);
}

/// (c/π)(√2 cos(ψ/2) − √(cos ψ − cos φ)) for ψ < φ.
inline double g_function(double psi, double phi, double c) {
  detail::require(psi >= 0.0 && phi <= pi, "g_function: angles must lie in [0, pi]");
  detail::require(psi < phi, "g_function: need psi < phi");
  // cos ψ − cos φ = 2 sin((φ+ψ)/2) sin((φ−ψ)/2), free of cancellation.
  const double gap = 2.0 * std::sin(0.5 * (phi + psi)) * std::sin(0.5 * (phi - psi));
  return c / pi * (std::numbers::sqrt2 * std::cos(0.5 * psi) - std::sqrt(gap));
}

/// Leading-order b₀ = (2R²/3)(π/(ε + sin ε) − 1).
inline double b0_leading(double R, double eps) {
  detail::require(R > 0.0, "b0_leading: R must be positive");
  detail::require(eps > 0.0 && eps <= pi, "b0_leading: eps must lie in (0, pi]");
  return 2.0 * R * R / 3.0 * (pi / (eps + std::sin(eps)) - 1.0);
}

namespace detail {

// ∫₀^ε K(u, v) w(v) dv for smooth w, split at the log singularity v = u.
template <class W>
double kernel_integral(double u, double eps, W&& weight) {
  auto integrand = [&](double v) { return kernel_closed(u, v) * weight(v); };
  double acc = 0.0;
  if (u > 0.0) acc += graded_rule(0.0, u, Grading::both).integrate(integrand);
  if (u < eps) acc += graded_rule(u, eps, Grading::both).integrate(integrand);
  return acc;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fredholm system

/// Nyström discretization of (I + K)Ĵ = M̂ on a Gauss-Legendre grid of [0, ε]
/// with singularity subtraction on the diagonal, solved by LU.
inline CollinsSystem assemble_system(const CollinsConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_quad;
  const double eps = cfg.eps;
  const QuadratureRule rule = gauss_rule(n, 0.0, eps);

  CollinsSystem sys;
  sys.grid = rule.nodes;
  sys.weights = rule.weights;
  sys.kernel_matrix = Eigen::MatrixXd::Zero(n, n);
  sys.rhs.assign(n, 0.0);
  sys.j_hat.assign(n, 0.0);
  if (n < 32) sys.warnings.push_back("n_quad below 32; the Nystrom solution may be under-resolved");
  if (eps > 0.2) sys.warnings.push_back("eps above 0.2: outside the small-window regime, result is an extrapolation");
  if (cfg.zero_kernel) return sys;

  const auto& u = sys.grid;
  const auto& w = sys.weights;
  Eigen::MatrixXd& K = sys.kernel_matrix;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      K(i, j) = K(j, i) = kernel_closed(u[i], u[j]);
    }
  }
  for (int i = 0; i < n; ++i) {
    const double row_integral = detail::kernel_integral(u[i], eps, [](double) { return 1.0; });
    double off = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j != i) off += w[j] * K(i, j);
    }
    K(i, i) = (row_integral - off) / w[i];
    sys.rhs[i] = std::numbers::sqrt2 / pi *
                 detail::kernel_integral(u[i], eps, [](double v) { return std::cos(0.5 * v); });
  }

  // (I + K W) Ĵ = M̂
  Eigen::MatrixXd A = K * Eigen::VectorXd::Map(w.data(), n).asDiagonal();
  A.diagonal().array() += 1.0;
  const Eigen::VectorXd b = Eigen::VectorXd::Map(sys.rhs.data(), n);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const Eigen::VectorXd x = lu.solve(b);
  if (!x.allFinite()) throw SolverError("collins: Fredholm system is singular");
  sys.residual = (A * x - b).norm();
  if (sys.residual > 1e-10 * std::max(1.0, b.norm())) {
    sys.warnings.push_back("collins: linear solve residual above 1e-10");
  }
  Eigen::VectorXd::Map(sys.j_hat.data(), n) = x;

  double moment = 0.0;
  for (int i = 0; i < n; ++i) moment += w[i] * x[i] * std::cos(0.5 * u[i]);
  sys.c_factor = std::numbers::sqrt2 * pi / (eps + std::sin(eps)) * moment;
  return sys;
}

/// b₀ from (b₀ + 2R²/3)(1 − c_factor) = (2R²/3) π/(ε + sin ε).
inline B0Result solve_b0(const CollinsConfig& cfg) {
  const CollinsSystem sys = assemble_system(cfg);
  B0Result out;
  out.warnings = sys.warnings;
  out.c_factor = sys.c_factor;
  out.leading = b0_leading(cfg.R, cfg.eps);
  if (!(sys.c_factor < 1.0)) {
    throw SolverError("collins: correction factor reached 1; b0 is ill-posed at this cap angle");
  }
  const double scale = 2.0 * cfg.R * cfg.R / 3.0;
  out.correction_factor = 1.0 / (1.0 - sys.c_factor);
  // Written so that c_factor = 0 reproduces b0_leading bit for bit.
  out.b0 = scale * (pi / (cfg.eps + std::sin(cfg.eps)) / (1.0 - sys.c_factor) - 1.0);
  out.mfpt_center = out.b0 + cfg.R * cfg.R / 6.0;
  return out;
}

/// L²[0, ε] norm of the integral operator K, as the largest singular value of
/// W^{1/2} K W^{1/2}.
inline double operator_norm(const CollinsConfig& cfg) {
  const CollinsSystem sys = assemble_system(cfg);
  if (cfg.zero_kernel) return 0.0;
  const int n = cfg.n_quad;
  const Eigen::VectorXd root_w = Eigen::VectorXd::Map(sys.weights.data(), n).cwiseSqrt();
  const Eigen::MatrixXd S = root_w.asDiagonal() * sys.kernel_matrix * root_w.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

/// Upper bound (√30/2π) ε log(1/ε) for the operator norm.
inline double operator_norm_bound(double eps) {
  detail::require(eps > 0.0 && eps < 1.0, "operator_norm_bound: eps must lie in (0, 1)");
  return std::sqrt(30.0) / (2.0 * pi) * eps * std::log(1.0 / eps);
}

struct DoubleIntegral {
  double value = 0.0;    // ∫₀^ε∫₀^ε K(u, v) cos(u/2) cos(v/2) du dv
  double leading = 0.0;  // (1/π) ε² log(1/ε)
  double ratio = 0.0;
};

inline DoubleIntegral double_integral_check(double eps) {
  detail::require(eps > 0.0 && eps < 0.5, "double_integral_check: eps must lie in (0, 0.5)");
  const QuadratureRule outer = graded_rule(0.0, eps, Grading::both, 12, 8, 0.25);
  DoubleIntegral out;
  out.value = outer.integrate([&](double u) {
    return std::cos(0.5 * u) * detail::kernel_integral(u, eps, [](double v) { return std::cos(0.5 * v); });
  });
  out.leading = eps * eps * std::log(1.0 / eps) / pi;
  out.ratio = out.value / out.leading;
  return out;
}

/// (b₀ · 4a/|Ω| − 1) with a = Rε and |Ω| = 4πR³/3: the relative correction
/// to the leading-order MFPT carried by b₀.
inline double relative_correction(double b0, double R, double eps) {
  const double a = R * eps;
  const double volume = 4.0 * pi * R * R * R / 3.0;
  return b0 * 4.0 * a / volume - 1.0;
}

}  // namespace narrow_escape
