#pragma once

// Leading-order flux through a small flat window. The flux density g and the
// constant C₀ solve
//
//   (1/2π) ∫_window g(x) / |x − y| dS_x = C₀   for y in the window,
//   ∫_window g dS = V / D,
//
// discretized by piecewise-constant collocation. For an ellipse the exact
// solution is g₀ = V/(2πDab) / √(1 − x²/a² − y²/b²) with C₀ = V K(e)/(2πDa).

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "narrow_escape/common.hpp"
#include "narrow_escape/numerics.hpp"

namespace narrow_escape {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Cell of the polar map (r, t) -> (a r cos t, b r sin t) of an ellipse mesh.
struct PolarCell {
  double r0 = 0.0;
  double r1 = 0.0;
  double t0 = 0.0;
  double t1 = 0.0;
};

enum class WindowShape { ellipse, polygon };

struct PlanarWindowMesh {
  WindowShape shape = WindowShape::polygon;
  double a = 0.0;  // semi-axes, for ellipse meshes
  double b = 0.0;
  std::vector<Point2> centroids;
  std::vector<double> areas;
  // Counter-clockwise vertices per element; empty for meshes imported from
  // the centroid/area text format.
  std::vector<std::vector<Point2>> polygons;
  std::vector<PolarCell> cells;  // ellipse meshes only

  std::size_t size() const { return centroids.size(); }
  bool has_geometry() const { return polygons.size() == centroids.size() && !polygons.empty(); }
  double total_area() const {
    double acc = 0.0;
    for (double A : areas) acc += A;
    return acc;
  }
};

struct FluxSolution {
  std::vector<double> g;
  double C0 = 0.0;
  double total_flux = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

inline double polygon_area(const std::vector<Point2>& p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point2& u = p[i];
    const Point2& v = p[(i + 1) % p.size()];
    acc += u.x * v.y - v.x * u.y;
  }
  return 0.5 * acc;
}

inline Point2 polygon_centroid(const std::vector<Point2>& p) {
  double cx = 0.0;
  double cy = 0.0;
  double a2 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point2& u = p[i];
    const Point2& v = p[(i + 1) % p.size()];
    const double cross = u.x * v.y - v.x * u.y;
    cx += (u.x + v.x) * cross;
    cy += (u.y + v.y) * cross;
    a2 += cross;
  }
  return {cx / (3.0 * a2), cy / (3.0 * a2)};
}

inline double polygon_diameter(const std::vector<Point2>& p) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = i + 1; j < p.size(); ++j) d = std::max(d, std::hypot(p[i].x - p[j].x, p[i].y - p[j].y));
  }
  return d;
}

}  // namespace detail

/// Exact ∫_P dA / |x − y| over a counter-clockwise polygon P for a point y in
/// its plane (inside, on, or outside P).
///
/// In polar coordinates about y the integral is ∫ ρ_max(φ) dφ; an edge whose
/// line lies at signed distance h from y contributes h [asinh(s₂/|h|) − asinh(s₁/|h|)],
/// with s₁, s₂ the edge end points measured along the edge from the foot of
/// the perpendicular.
inline double polygon_inverse_distance_integral(const std::vector<Point2>& poly, Point2 y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % poly.size()];
    const double ex = q.x - p.x;
    const double ey = q.y - p.y;
    const double len = std::hypot(ex, ey);
    if (len == 0.0) continue;
    const double tx = ex / len;
    const double ty = ey / len;
    // Outward normal of a CCW polygon is (ty, −tx); h > 0 when y is inside.
    const double h = (p.x - y.x) * ty - (p.y - y.y) * tx;
    if (std::abs(h) < 1e-15 * len) continue;
    const double s1 = (p.x - y.x) * tx + (p.y - y.y) * ty;
    const double s2 = s1 + len;
    const double ah = std::abs(h);
    acc += h * (std::asinh(s2 / ah) - std::asinh(s1 / ah));
  }
  return acc;
}

/// Polar-mapped ellipse mesh: n rings with radii r_k = 1 − (1 − k/n)², which
/// concentrate toward the rim where the flux has its inverse square-root
/// singularity, and 4n sectors. The innermost ring is a fan of triangles.
inline PlanarWindowMesh build_ellipse_mesh(double a, double b, int n) {
  detail::require(b > 0.0 && b <= a, "build_ellipse_mesh: need 0 < b <= a");
  detail::require(n >= 8, "build_ellipse_mesh: resolution must be at least 8");
  PlanarWindowMesh mesh;
  mesh.shape = WindowShape::ellipse;
  mesh.a = a;
  mesh.b = b;
  const int sectors = 4 * n;
  auto radius = [&](int k) {
    const double s = 1.0 - static_cast<double>(k) / n;
    return 1.0 - s * s;
  };
  auto map = [&](double r, double t) { return Point2{a * r * std::cos(t), b * r * std::sin(t)}; };
  for (int k = 0; k < n; ++k) {
    const double r0 = radius(k);
    const double r1 = radius(k + 1);
    for (int s = 0; s < sectors; ++s) {
      const double t0 = 2.0 * pi * s / sectors;
      const double t1 = 2.0 * pi * (s + 1) / sectors;
      std::vector<Point2> poly;
      if (k == 0) {
        poly = {Point2{0.0, 0.0}, map(r1, t0), map(r1, t1)};
      } else {
        poly = {map(r0, t0), map(r1, t0), map(r1, t1), map(r0, t1)};
      }
      mesh.centroids.push_back(detail::polygon_centroid(poly));
      mesh.areas.push_back(detail::polygon_area(poly));
      mesh.polygons.push_back(std::move(poly));
      mesh.cells.push_back({r0, r1, t0, t1});
    }
  }
  return mesh;
}

struct WindowSolveOptions {
  // Element pairs closer than this many element diameters use the exact
  // polygon integral; farther pairs use area / distance.
  double near_field = 6.0;
};

namespace detail {

// I(i, j) = ∫_{element j} dS / |x − y_i|, y_i the centroid of element i.
inline double influence(const PlanarWindowMesh& mesh, std::size_t i, std::size_t j,
                        const std::vector<double>& diameters, double near_field) {
  const Point2 y = mesh.centroids[i];
  if (mesh.has_geometry()) {
    const double d = std::hypot(mesh.centroids[j].x - y.x, mesh.centroids[j].y - y.y);
    if (i == j || d < near_field * diameters[j]) return polygon_inverse_distance_integral(mesh.polygons[j], y);
    return mesh.areas[j] / d;
  }
  if (i == j) return 2.0 * std::sqrt(pi * mesh.areas[j]);  // disk of equal area
  return mesh.areas[j] / std::hypot(mesh.centroids[j].x - y.x, mesh.centroids[j].y - y.y);
}

}  // namespace detail

/// Collocation at element centroids, bordered with the total-flux constraint.
inline FluxSolution solve_window_ie(const PlanarWindowMesh& mesh, double V, double D,
                                    const WindowSolveOptions& opt = {}) {
  detail::require(V > 0.0 && D > 0.0, "solve_window_ie: V and D must be positive");
  const std::size_t n = mesh.size();
  detail::require(n >= 1 && mesh.areas.size() == n, "solve_window_ie: empty or inconsistent mesh");
  for (double A : mesh.areas) detail::require(A > 0.0, "solve_window_ie: element areas must be positive");

  FluxSolution sol;
  if (!mesh.has_geometry()) {
    sol.warnings.push_back("mesh carries no element geometry; using point-source and equal-area disk integrals");
  } else if (mesh.shape == WindowShape::ellipse && !mesh.cells.empty()) {
    const double rim_width = 1.0 - mesh.cells.back().r0;
    if (rim_width > 0.01) sol.warnings.push_back("rim refinement is coarse; expect a C0 error above 2%");
  }

  std::vector<double> diameters(n, 0.0);
  if (mesh.has_geometry()) {
    for (std::size_t j = 0; j < n; ++j) diameters[j] = detail::polygon_diameter(mesh.polygons[j]);
  }

  const Eigen::Index m = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd A(m + 1, m + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      A(i, j) = detail::influence(mesh, i, j, diameters, opt.near_field) / (2.0 * pi);
    }
    A(i, m) = -1.0;
  }
  for (std::size_t j = 0; j < n; ++j) A(m, j) = mesh.areas[j];
  A(m, m) = 0.0;
  rhs(m) = V / D;

  if (!A.allFinite()) throw SolverError("solve_window_ie: coincident element centroids give an unbounded influence");
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const Eigen::VectorXd x = lu.solve(rhs);
  if (!x.allFinite()) throw SolverError("solve_window_ie: collocation system is singular");
  const double rel = (A * x - rhs).norm() / rhs.norm();
  if (!(rel <= 1e-8)) throw SolverError("solve_window_ie: collocation system is numerically singular");

  sol.g.assign(x.data(), x.data() + m);
  sol.C0 = x(m);
  for (std::size_t j = 0; j < n; ++j) sol.total_flux += sol.g[j] * mesh.areas[j];
  return sol;
}

/// Flux density of the element whose centroid is nearest to (x, y).
inline double flux_at(const PlanarWindowMesh& mesh, const FluxSolution& sol, double x, double y) {
  detail::require(sol.g.size() == mesh.size() && !sol.g.empty(), "flux_at: solution does not match mesh");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < mesh.size(); ++j) {
    const double d = std::hypot(mesh.centroids[j].x - x, mesh.centroids[j].y - y);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return sol.g[best];
}

/// Exact flux density on an elliptic window,
/// g₀(x, y) = (V/(2πDab)) / √(1 − x²/a² − y²/b²).
inline double elliptic_flux_oracle(double a, double b, double V, double D, double x, double y) {
  detail::require(b > 0.0 && b <= a, "elliptic_flux_oracle: need 0 < b <= a");
  detail::require(V > 0.0 && D > 0.0, "elliptic_flux_oracle: V and D must be positive");
  const double q = 1.0 - (x / a) * (x / a) - (y / b) * (y / b);
  detail::require(q > 0.0, "elliptic_flux_oracle: point must lie strictly inside the window");
  return V / (2.0 * pi * D * a * b) / std::sqrt(q);
}

/// C₀ of the exact elliptic solution, V K(e) / (2π D a).
inline double elliptic_C0(double a, double b, double V, double D) {
  detail::require(b > 0.0 && b <= a, "elliptic_C0: need 0 < b <= a");
  const double q = b / a;
  const double e = a == b ? 0.0 : std::sqrt((1.0 - q) * (1.0 + q));
  return V * elliptic_K(e) / (2.0 * pi * D * a);
}

struct PotentialReport {
  double expected = 0.0;       // V K(e) / (2π D a)
  double max_deviation = 0.0;  // max relative deviation over the check points
  std::vector<Point2> points;
  std::vector<double> values;
};

/// Single-layer potential (1/2π) ∫ g₀ / |x − y| dS of the exact elliptic flux
/// at `n_check` interior points, with V = D = 1. Each mesh cell contributes
/// its exact mean of g₀ times the exact polygon integral of 1/|x − y|.
inline PotentialReport verify_constant_potential(double a, double b, int n_check, int resolution = 32) {
  detail::require(b > 0.0 && b <= a, "verify_constant_potential: need 0 < b <= a");
  detail::require(n_check >= 1, "verify_constant_potential: need at least one check point");
  const PlanarWindowMesh mesh = build_ellipse_mesh(a, b, resolution);
  const double g_scale = 1.0 / (2.0 * pi * a * b);

  // Mean of 1/√(1 − r²) over the cell in the polar-mapped variables (area
  // element a b r dr dt).
  std::vector<double> g_mean(mesh.size());
  for (std::size_t j = 0; j < mesh.size(); ++j) {
    const PolarCell& c = mesh.cells[j];
    const double num = std::sqrt(1.0 - c.r0 * c.r0) - std::sqrt(1.0 - c.r1 * c.r1);
    const double den = 0.5 * (c.r1 * c.r1 - c.r0 * c.r0);
    g_mean[j] = g_scale * num / den;
  }

  PotentialReport report;
  report.expected = elliptic_C0(a, b, 1.0, 1.0);
  const double golden = pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < n_check; ++k) {
    const double rho = 0.9 * std::sqrt((k + 0.5) / n_check);
    const double phi = golden * k;
    const Point2 y{a * rho * std::cos(phi), b * rho * std::sin(phi)};
    double acc = 0.0;
    for (std::size_t j = 0; j < mesh.size(); ++j) {
      // The cell-mean weight is exact only where 1/|x − y| is nearly constant
      // over the cell; the polygon's area also differs slightly from the
      // curved cell's, so normalize the weight by the true cell area ratio.
      const PolarCell& c = mesh.cells[j];
      const double curved_area = a * b * 0.5 * (c.r1 * c.r1 - c.r0 * c.r0) * (c.t1 - c.t0);
      acc += g_mean[j] * curved_area / mesh.areas[j] * polygon_inverse_distance_integral(mesh.polygons[j], y);
    }
    const double value = acc / (2.0 * pi);
    report.points.push_back(y);
    report.values.push_back(value);
    report.max_deviation = std::max(report.max_deviation, std::abs(value / report.expected - 1.0));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Text format: one element per line, "x y area"; '#' starts a comment.

inline void write_mesh(std::ostream& os, const PlanarWindowMesh& mesh) {
  os << "# x y area\n";
  os.precision(17);
  for (std::size_t j = 0; j < mesh.size(); ++j) {
    os << mesh.centroids[j].x << ' ' << mesh.centroids[j].y << ' ' << mesh.areas[j] << '\n';
  }
}

inline PlanarWindowMesh read_mesh(std::istream& is) {
  PlanarWindowMesh mesh;
  mesh.shape = WindowShape::polygon;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double x = 0.0;
    double y = 0.0;
    double area = 0.0;
    if (!(ss >> x)) continue;  // blank line
    if (!(ss >> y >> area)) throw DomainError("read_mesh: line " + std::to_string(line_no) + " needs x y area");
    std::string extra;
    if (ss >> extra) throw DomainError("read_mesh: line " + std::to_string(line_no) + " has trailing fields");
    if (!(area > 0.0)) throw DomainError("read_mesh: line " + std::to_string(line_no) + " has a nonpositive area");
    mesh.centroids.push_back({x, y});
    mesh.areas.push_back(area);
  }
  if (mesh.centroids.empty()) throw DomainError("read_mesh: no elements");
  return mesh;
}

}  // namespace narrow_escape
