#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/ellint_1.hpp>
#include <boost/math/special_functions/legendre.hpp>
#include <gtest/gtest.h>

#include "narrow_escape/collins.hpp"
#include "narrow_escape/numerics.hpp"

using namespace narrow_escape;
namespace bq = boost::math::quadrature;

namespace {

double adaptive(auto f, double a, double b) { return bq::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-14); }

}  // namespace

// ---------------------------------------------------------------------------
// elliptic_K

TEST(EllipticK, ZeroEccentricity) { EXPECT_NEAR(elliptic_K(0.0), pi / 2, 1e-15); }

TEST(EllipticK, MatchesBoost) {
  for (double e : {0.05, 0.1, 0.3, 0.5, 0.8, 0.9, 0.99, 0.999999}) {
    const double ref = boost::math::ellint_1(e);
    EXPECT_NEAR(elliptic_K(e) / ref, 1.0, 1e-13) << "e = " << e;
  }
}

TEST(EllipticK, DirectQuadratureAtHalf) {
  const double e = 0.5;
  const double ref = bq::tanh_sinh<double>().integrate(
      [&](double t) { return 1.0 / std::sqrt(1.0 - e * e * std::sin(t) * std::sin(t)); }, 0.0, pi / 2);
  EXPECT_NEAR(elliptic_K(e), ref, 1e-13);
}

TEST(EllipticK, SmallEccentricitySeries) {
  for (double e : {0.05, 0.1, 0.2}) {
    const double series = pi / 2 * (1.0 + 0.25 * e * e + (9.0 / 64.0) * std::pow(e, 4));
    EXPECT_LT(std::abs(elliptic_K(e) - series), 5.0 * std::pow(e, 6)) << "e = " << e;
  }
  const double e = 0.1;
  EXPECT_NEAR(elliptic_K(e), pi / 2 * (1.0 + 0.25 * e * e + (9.0 / 64.0) * std::pow(e, 4)), 1e-6);
}

// K(e) − ½ log(16/(1 − e²)) → 0 as e → 1. Written with 1 − e in place of
// 1 − e² the difference tends to −½ log 2 instead.
TEST(EllipticK, LogarithmicLimit) {
  auto gap = [](double e) { return std::abs(elliptic_K(e) - 0.5 * std::log(16.0 / ((1.0 - e) * (1.0 + e)))); };
  EXPECT_LT(gap(0.999), 2e-3);
  EXPECT_LT(gap(0.999999), 1e-5);
  EXPECT_NEAR(elliptic_K(0.999999) - 0.5 * std::log(16.0 / (1.0 - 0.999999)), -0.5 * std::log(2.0), 1e-5);
}

TEST(EllipticK, StrictlyIncreasing) {
  double prev = elliptic_K(0.0);
  for (int k = 1; k < 200; ++k) {
    const double cur = elliptic_K(k / 200.0);
    EXPECT_GT(cur, prev);
    prev = cur;
  }
}

TEST(EllipticK, Errors) {
  EXPECT_THROW(elliptic_K(-0.1), DomainError);
  EXPECT_THROW(elliptic_K(1.5), DomainError);
  EXPECT_THROW(elliptic_K(std::nan("")), DomainError);
  EXPECT_THROW(elliptic_K(1.0), DivergenceError);
}

// ---------------------------------------------------------------------------
// Legendre polynomials

TEST(Legendre, SimpleValues) {
  EXPECT_EQ(legendre_P(0, 0.3), 1.0);
  EXPECT_EQ(legendre_P(1, -0.4), -0.4);
  EXPECT_NEAR(legendre_P(7, 1.0), 1.0, 1e-15);
  EXPECT_NEAR(legendre_P(8, -1.0), 1.0, 1e-15);
}

TEST(Legendre, MatchesBoost) {
  for (int n = 0; n <= 40; ++n) {
    for (double x : {-0.97, -0.5, 0.0, 0.13, 0.7, 0.999}) {
      EXPECT_NEAR(legendre_P(n, x), boost::math::legendre_p(n, x), 1e-13) << n << " " << x;
    }
  }
}

TEST(Legendre, AllDegreesAgreeWithSingle) {
  const auto P = legendre_P_all(25, 0.37);
  ASSERT_EQ(P.size(), 26u);
  for (int n = 0; n <= 25; ++n) EXPECT_DOUBLE_EQ(P[n], legendre_P(n, 0.37));
}

TEST(Legendre, Errors) {
  EXPECT_THROW(legendre_P(3, 1.01), DomainError);
  EXPECT_THROW(legendre_P(-1, 0.5), DomainError);
}

// Pₙ(cos θ) = (√2/π) ∫₀^θ cos((n+½)u) / √(cos u − cos θ) du, evaluated with
// u = θ(1 − s²) so the integrand is smooth in s.
TEST(Legendre, MehlerIdentity) {
  for (double theta : {0.3, 1.0, 2.0}) {
    for (int n = 0; n <= 20; ++n) {
      auto integrand = [&](double s) {
        const double u = theta * (1.0 - s * s);
        const double gap = 2.0 * std::sin(0.5 * (theta + u)) * std::sin(0.5 * theta * s * s);
        if (s == 0.0) return 0.0;
        return std::cos((n + 0.5) * u) * 2.0 * theta * s / std::sqrt(gap);
      };
      const double mehler = std::numbers::sqrt2 / pi * adaptive(integrand, 0.0, 1.0);
      EXPECT_NEAR(mehler, legendre_P(n, std::cos(theta)), 1e-8) << "n = " << n << " theta = " << theta;
    }
  }
}

// ---------------------------------------------------------------------------
// Quadrature

TEST(GaussRule, Exactness) {
  EXPECT_NEAR(gauss_rule(2, 0.0, 1.0).integrate([](double x) { return x * x; }), 1.0 / 3.0, 1e-14);
  for (int n = 1; n <= 12; ++n) {
    const QuadratureRule rule = gauss_rule(n, -0.5, 2.0);
    for (int p = 0; p <= 2 * n - 1; ++p) {
      const double exact = (std::pow(2.0, p + 1) - std::pow(-0.5, p + 1)) / (p + 1);
      EXPECT_NEAR(rule.integrate([&](double x) { return std::pow(x, p); }), exact, 1e-12 * std::max(1.0, exact))
          << "n = " << n << " degree " << p;
    }
  }
}

// The five-point error for sin on [0, π] is 1.1e-7 (the rule is exact only to
// degree 9), so the bound here is the theoretical one; eight points reach 1e-10.
TEST(GaussRule, Sine) {
  auto f = [](double x) { return std::sin(x); };
  EXPECT_NEAR(gauss_rule(5, 0.0, pi).integrate(f), 2.0, 2e-7);
  EXPECT_NEAR(gauss_rule(8, 0.0, pi).integrate(f), 2.0, 1e-10);
}

// A logarithm whose singularity sits 1e-6 outside the interval: a single
// 64-point panel is off by about 1.2e-5, a rule graded toward the end point
// reaches 1e-6 easily.
TEST(GaussRule, NearlySingularLog) {
  auto f = [](double x) { return std::log(x + 1e-6); };
  const double ref = bq::tanh_sinh<double>().integrate(f, 0.0, 0.1);
  EXPECT_NEAR(gauss_rule(64, 0.0, 0.1).integrate(f), ref, 2e-5);
  EXPECT_NEAR(graded_rule(0.0, 0.1, Grading::left).integrate(f), ref, 1e-10);
}

TEST(GaussRule, ErrorDropsTenfoldPerDoubling) {
  auto f = [](double x) { return std::exp(x) * std::cos(3.0 * x); };
  const double exact = (std::exp(2.0) * (std::cos(6.0) + 3.0 * std::sin(6.0)) - 1.0) / 10.0;
  double prev = std::abs(gauss_rule(2, 0.0, 2.0).integrate(f) - exact);
  for (int n = 4; n <= 32; n *= 2) {
    const double err = std::abs(gauss_rule(n, 0.0, 2.0).integrate(f) - exact);
    if (prev < 1e-13) break;
    EXPECT_LT(err, prev / 10.0) << "n = " << n;
    prev = err;
  }
}

TEST(GaussRule, Errors) {
  EXPECT_THROW(gauss_rule(0, 0.0, 1.0), DomainError);
  EXPECT_THROW(gauss_rule(4, 1.0, 1.0), DomainError);
}

TEST(GradedRule, EndpointSingularities) {
  auto lg = [](double x) { return std::log(x); };
  EXPECT_NEAR(graded_rule(0.0, 1.0, Grading::left).integrate(lg), -1.0, 1e-9);
  EXPECT_NEAR(graded_rule(0.0, 1.0, Grading::both).integrate([](double x) { return std::log(x) + std::log(1.0 - x); }),
              -2.0, 1e-9);
  EXPECT_NEAR(graded_rule(0.0, 1.0, Grading::right).integrate([](double x) { return 1.0 / std::sqrt(1.0 - x); }), 2.0,
              1e-6);
}

TEST(GradedRule, NodesStrictlyInside) {
  for (Grading g : {Grading::left, Grading::right, Grading::both}) {
    const QuadratureRule rule = graded_rule(0.3, 0.30001, g);
    for (double x : rule.nodes) {
      EXPECT_GT(x, 0.3);
      EXPECT_LT(x, 0.30001);
    }
  }
}

// ---------------------------------------------------------------------------
// Abel transforms

TEST(Abel, ZeroFunction) {
  auto zero = [](auto) { return 0.0; };
  for (double u : {0.0, 0.1, 0.25}) EXPECT_EQ(abel_forward(zero, 0.3, u), 0.0);
  EXPECT_EQ(abel_invert(zero, zero, 0.3, 0.1), 0.0);
}

TEST(Abel, ForwardAtCapEdgeIsZero) {
  auto h = [](auto a) { return cos(a); };
  EXPECT_EQ(abel_forward(h, 0.3, 0.3), 0.0);
}

TEST(Abel, ForwardMatchesQuadrature) {
  const double eps = 0.3;
  const double u = 0.1;
  auto h = [](auto a) { return sin(a); };
  const double ref = bq::tanh_sinh<double>().integrate(
      [&](double a) {
        const double gap = 2.0 * std::sin(0.5 * (a + u)) * std::sin(0.5 * (a - u));
        return std::sin(a) * std::sin(a) / std::sqrt(gap);
      },
      u, eps) /
                     (2.0 * pi);
  EXPECT_NEAR(abel_forward(h, eps, u), ref, 1e-10);
}

TEST(Abel, RoundTripHalfAngleCosine) {
  const double eps = 0.2;
  auto h = [](auto a) { return cos(a / 2.0); };
  auto H = [&](auto u) { return abel_forward(h, eps, u); };
  for (double theta : {0.05, 0.1, 0.15}) {
    EXPECT_NEAR(abel_invert(H, eps, theta), std::cos(theta / 2.0), 1e-6) << "theta = " << theta;
  }
}

TEST(Abel, RoundTripRandomSmoothFunctions) {
  std::mt19937 gen(2024);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (double eps : {0.05, 0.4, 1.5}) {
    for (int trial = 0; trial < 4; ++trial) {
      const double c0 = coef(gen), c1 = coef(gen), c2 = coef(gen), k = 1.0 + 3.0 * std::abs(coef(gen));
      auto h = [=](auto a) { return c0 + c1 * a + c2 * cos(k * a); };
      const AbelPair pair = make_abel_pair(h, eps, 7);
      for (std::size_t i = 0; i < pair.theta_grid.size(); ++i) {
        const double t = pair.theta_grid[i];
        EXPECT_NEAR(pair.inverse[i], c0 + c1 * t + c2 * std::cos(k * t), 1e-6) << "eps = " << eps;
      }
    }
  }
}

TEST(Abel, ExplicitDerivativeMatchesAutodiff) {
  const double eps = 0.5;
  auto H = [](auto u) { return exp(-u) * cos(u); };
  auto dH = [](double u) { return -std::exp(-u) * (std::cos(u) + std::sin(u)); };
  for (double theta : {0.1, 0.3, 0.45}) {
    EXPECT_NEAR(abel_invert(H, dH, eps, theta), abel_invert(H, eps, theta), 1e-12);
  }
}

// Inversion of H = −G(·, ε), checked against the defining formula
//   h(θ) = −(2/sin θ) d/dθ ∫_θ^ε H(u) sin u du / √(cos θ − cos u)
// with the integral by adaptive quadrature and the derivative by central
// differences. G has a square-root component at the cap edge.
TEST(Abel, InvertGFunctionAgainstDefinition) {
  const double eps = 0.2;
  auto H = [&](double u) { return -g_function(u, eps, 1.0); };
  auto dH = [&](double u) {
    const double gap = 2.0 * std::sin(0.5 * (eps + u)) * std::sin(0.5 * (eps - u));
    return -(1.0 / pi) * (-std::numbers::sqrt2 * 0.5 * std::sin(0.5 * u) + 0.5 * std::sin(u) / std::sqrt(gap));
  };
  // u = θ + (ε − θ)s² removes the inverse square root at u = θ.
  auto F = [&](double theta) {
    auto integrand = [&](double s) {
      if (s == 0.0) s = 1e-300;
      const double u = theta + (eps - theta) * s * s;
      const double gap = 2.0 * std::sin(0.5 * (theta + u)) * std::sin(0.5 * (eps - theta) * s * s);
      return H(u) * std::sin(u) * 2.0 * (eps - theta) * s / std::sqrt(gap);
    };
    return adaptive(integrand, 0.0, 1.0);
  };
  const double step = 1e-3;
  for (double theta : {0.05, 0.1, 0.15}) {
    const double dF = (-F(theta + 2 * step) + 8 * F(theta + step) - 8 * F(theta - step) + F(theta - 2 * step)) /
                      (12.0 * step);
    const double ref = -2.0 / std::sin(theta) * dF;
    EXPECT_NEAR(abel_invert(H, dH, eps, theta), ref, 1e-7 * std::abs(ref)) << "theta = " << theta;
  }
}

TEST(Abel, Errors) {
  auto h = [](auto a) { return cos(a); };
  EXPECT_THROW(abel_forward(h, 0.3, 0.31), DomainError);
  EXPECT_THROW(abel_forward(h, 0.0, 0.0), DomainError);
  EXPECT_THROW(abel_invert(h, 0.3, 0.0), DomainError);
  EXPECT_THROW(abel_invert(h, 0.3, 0.3), DomainError);
}
