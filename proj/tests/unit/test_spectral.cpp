#include <cmath>

#include <gtest/gtest.h>

#include "narrow_escape/collins.hpp"
#include "narrow_escape/spectral.hpp"

using namespace narrow_escape;

TEST(DualSeries, FullCapIsZero) {
  const LegendreSeriesSolution s = solve_dual_series(1.0, pi, 32);
  for (double a : s.coeffs) EXPECT_NEAR(a, 0.0, 1e-12);
  EXPECT_NEAR(average_mfpt(s).analytic, 1.0 / 15.0, 1e-12);
}

TEST(DualSeries, AgreesWithCollins) {
  for (double eps : {0.2, 0.3}) {
    CollinsConfig c;
    c.eps = eps;
    const double b0 = solve_b0(c).b0;
    EXPECT_NEAR(solve_dual_series(1.0, eps, 64).coeffs[0] / b0, 1.0, 0.01) << "eps = " << eps;
  }
}

TEST(DualSeries, IntegratedFluxResidualDecreases) {
  double prev = INFINITY;
  for (int N : {32, 64, 128}) {
    const double r = solve_dual_series(1.0, 0.3, N).residual_flux;
    EXPECT_LT(r, prev) << "N = " << N;
    prev = r;
  }
  EXPECT_LT(prev, 0.03);
}

TEST(DualSeries, RadiusScaling) {
  const double a1 = solve_dual_series(1.0, 0.4, 48).coeffs[0];
  EXPECT_NEAR(solve_dual_series(2.5, 0.4, 48).coeffs[0], 6.25 * a1, 1e-9 * a1);
}

TEST(DualSeries, BoundaryBehaviour) {
  const LegendreSeriesSolution s = solve_dual_series(1.0, 0.3, 64);
  EXPECT_NEAR(reconstruct_mfpt(s, 1.0, 0.0), 0.0, 0.02 * s.coeffs[0]);
  EXPECT_NEAR(reconstruct_mfpt(s, 1.0, 0.15), 0.0, 0.1);
  // ∂v/∂r = ∂u/∂r − R/3 vanishes away from the window.
  EXPECT_NEAR(boundary_radial_derivative(s, pi), 1.0 / 3.0, 0.01);
  EXPECT_NEAR(boundary_radial_derivative(s, 2.0), 1.0 / 3.0, 0.02);
}

TEST(DualSeries, ReconstructionAtCentre) {
  const LegendreSeriesSolution s = solve_dual_series(1.3, 0.5, 32);
  EXPECT_DOUBLE_EQ(reconstruct_mfpt(s, 0.0, 1.234), s.coeffs[0] + 1.3 * 1.3 / 6.0);
  EXPECT_DOUBLE_EQ(average_mfpt(s).center, s.coeffs[0] + 1.3 * 1.3 / 6.0);
}

// The truncated series rings at the rim on the surface itself, so positivity
// is checked inside the ball.
TEST(DualSeries, NonnegativeInside) {
  const LegendreSeriesSolution s = solve_dual_series(1.0, 0.5, 64);
  for (int i = 0; i <= 9; ++i) {
    for (int j = 0; j <= 20; ++j) {
      const double r = 0.1 * i, th = pi * j / 20.0;
      EXPECT_GT(reconstruct_mfpt(s, r, th), 0.0) << r << " " << th;
    }
  }
}

TEST(DualSeries, FarFromWindowExceedsNear) {
  const LegendreSeriesSolution s = solve_dual_series(1.0, 0.3, 64);
  EXPECT_GT(reconstruct_mfpt(s, 1.0, pi), reconstruct_mfpt(s, 0.0, 0.0));
  EXPECT_GT(reconstruct_mfpt(s, 0.0, 0.0), reconstruct_mfpt(s, 0.8, 0.0));
}

TEST(AverageMFPT, AnalyticMatchesQuadrature) {
  for (double eps : {0.1, 0.3, 1.0}) {
    const AverageMFPT avg = average_mfpt(solve_dual_series(2.0, eps, 64));
    EXPECT_NEAR(avg.analytic, avg.quadrature, 1e-8 * avg.analytic);
  }
}

// The volume average sits just below the centre value: by R²/10 in absolute terms.
TEST(AverageMFPT, CloseToCentreForSmallCaps) {
  const double eps = 0.1;
  const AverageMFPT avg = average_mfpt(solve_dual_series(1.0, eps, 128));
  EXPECT_GT(avg.analytic / avg.center, 1.0 - 3.0 * eps);
  EXPECT_LT(avg.analytic / avg.center, 1.0);
  EXPECT_NEAR(avg.center - avg.analytic, 0.1, 1e-12);
}

TEST(AverageMFPT, TwoTermRemainderAtSmallCap) {
  const double eps = 0.05;
  const double a0 = solve_dual_series(1.0, eps, 512).coeffs[0];
  const double rel = relative_correction(a0, 1.0, eps);
  EXPECT_LE(std::abs(rel - eps * std::log(1.0 / eps)) / eps, 5.0);
}

TEST(DualSeries, Errors) {
  EXPECT_THROW(solve_dual_series(1.0, 0.3, 8), DomainError);
  EXPECT_THROW(solve_dual_series(1.0, 0.0, 32), DomainError);
  EXPECT_THROW(solve_dual_series(-1.0, 0.3, 32), DomainError);
  EXPECT_THROW(solve_dual_series(1.0, 0.3, 32, 40), DomainError);
  const LegendreSeriesSolution s = solve_dual_series(1.0, 0.3, 32);
  EXPECT_THROW(reconstruct_mfpt(s, 1.5, 0.0), DomainError);
  EXPECT_THROW(reconstruct_mfpt(s, -0.1, 0.0), DomainError);
  EXPECT_THROW(average_mfpt(LegendreSeriesSolution{}), DomainError);
}
