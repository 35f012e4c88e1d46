#pragma once

// Monte Carlo first-passage times for Brownian motion in three geometries:
//
//   BallWithCap            ball of radius R centred at the origin, absorbing
//                          on the cap of half-angle ε about +z (ε = 0: no window)
//   CylinderAxial          0 ≤ z ≤ L, |(x, y)| ≤ radius, absorbing at z = 0
//   BoxWithEllipticWindow  [0, Lx]×[0, Ly]×[0, Lz], absorbing on the ellipse of
//                          semi-axes a (along x), b (along y) centred on z = 0
//
// Euler-Maruyama steps with specular reflection at reflecting walls.
// Absorption is tested at the point where a step crosses the boundary. With
// the bridge correction enabled, a step that ends inside the domain is also
// absorbed with the probability exp(−d₁d₂/(D dt)) that the Brownian bridge
// between its end points (at distances d₁, d₂ from the absorbing surface)
// touched it.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "narrow_escape/asymptotics.hpp"
#include "narrow_escape/common.hpp"
#include "narrow_escape/rng.hpp"

namespace narrow_escape {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct BallWithCap {
  double R = 1.0;
  double eps = 0.1;
};

struct CylinderAxial {
  double L = 1.0;
  double radius = 1.0;
};

struct BoxWithEllipticWindow {
  double Lx = 1.0;
  double Ly = 1.0;
  double Lz = 1.0;
  double a = 0.1;
  double b = 0.1;
};

using SimGeometry = std::variant<BallWithCap, CylinderAxial, BoxWithEllipticWindow>;

inline const char* geometry_name(const SimGeometry& g) {
  return std::visit(
      [](const auto& v) -> const char* {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BallWithCap>) return "ball";
        if constexpr (std::is_same_v<T, CylinderAxial>) return "cylinder";
        if constexpr (std::is_same_v<T, BoxWithEllipticWindow>) return "box";
      },
      g);
}

enum class StartRule { uniform, fixed_point };

struct SimConfig {
  SimGeometry geometry = BallWithCap{};
  double diffusion = 1.0;
  double dt = 0.0;  // 0 selects the geometry default
  std::int64_t n_paths = 10000;
  std::uint64_t seed = 1;
  std::int64_t max_steps = 100000000;
  StartRule start = StartRule::uniform;
  Vec3 start_point{};
  bool bridge_correction = true;
  int workers = 0;  // 0: hardware concurrency
};

struct SimResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::int64_t n_absorbed = 0;
  std::int64_t n_censored = 0;
  double dt_used = 0.0;
  double elapsed = 0.0;  // seconds
  bool unreliable = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline void validate_geometry(const SimGeometry& g) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BallWithCap>) {
          require(v.R > 0.0, "ball: R must be positive");
          require(v.eps >= 0.0 && v.eps < pi, "ball: eps must lie in [0, pi)");
        } else if constexpr (std::is_same_v<T, CylinderAxial>) {
          require(v.L > 0.0 && v.radius > 0.0, "cylinder: L and radius must be positive");
        } else {
          require(v.Lx > 0.0 && v.Ly > 0.0 && v.Lz > 0.0, "box: side lengths must be positive");
          require(v.b > 0.0 && v.b <= v.a, "box: window needs 0 < b <= a");
          require(v.a <= 0.5 * v.Lx && v.b <= 0.5 * v.Ly, "box: window must fit inside the face");
        }
      },
      g);
}

// Smallest feature the time step has to resolve.
inline double feature_length(const SimGeometry& g) {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BallWithCap>) {
          return v.eps > 0.0 ? v.R * std::sin(v.eps) : v.R;
        } else if constexpr (std::is_same_v<T, CylinderAxial>) {
          return v.L;
        } else {
          return v.b;
        }
      },
      g);
}

inline double volume(const SimGeometry& g) {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BallWithCap>) {
          return 4.0 * pi * v.R * v.R * v.R / 3.0;
        } else if constexpr (std::is_same_v<T, CylinderAxial>) {
          return pi * v.radius * v.radius * v.L;
        } else {
          return v.Lx * v.Ly * v.Lz;
        }
      },
      g);
}

inline bool inside(const SimGeometry& g, Vec3 p) {
  return std::visit(
      [&](const auto& v) -> bool {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BallWithCap>) {
          return p.x * p.x + p.y * p.y + p.z * p.z <= v.R * v.R;
        } else if constexpr (std::is_same_v<T, CylinderAxial>) {
          return p.z >= 0.0 && p.z <= v.L && p.x * p.x + p.y * p.y <= v.radius * v.radius;
        } else {
          return p.x >= 0.0 && p.x <= v.Lx && p.y >= 0.0 && p.y <= v.Ly && p.z >= 0.0 && p.z <= v.Lz;
        }
      },
      g);
}

inline Vec3 sample_uniform(const SimGeometry& g, PathStream& rng) {
  return std::visit(
      [&](const auto& v) -> Vec3 {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BallWithCap>) {
          for (;;) {
            const Vec3 p{(2.0 * rng.uniform53() - 1.0) * v.R, (2.0 * rng.uniform53() - 1.0) * v.R,
                         (2.0 * rng.uniform53() - 1.0) * v.R};
            if (p.x * p.x + p.y * p.y + p.z * p.z < v.R * v.R) return p;
          }
        } else if constexpr (std::is_same_v<T, CylinderAxial>) {
          for (;;) {
            const double x = (2.0 * rng.uniform53() - 1.0) * v.radius;
            const double y = (2.0 * rng.uniform53() - 1.0) * v.radius;
            if (x * x + y * y < v.radius * v.radius) return {x, y, rng.uniform53() * v.L};
          }
        } else {
          return {rng.uniform53() * v.Lx, rng.uniform53() * v.Ly, rng.uniform53() * v.Lz};
        }
      },
      g);
}

// Mirror image of q across the plane through p with unit normal n.
inline Vec3 mirror(Vec3 q, Vec3 p, Vec3 n) {
  const double d = 2.0 * ((q.x - p.x) * n.x + (q.y - p.y) * n.y + (q.z - p.z) * n.z);
  return {q.x - d * n.x, q.y - d * n.y, q.z - d * n.z};
}

// Parameter s ∈ (0, 1] at which x1 + s (x2 − x1) leaves the sphere |x| = R,
// for x1 inside and x2 outside.
inline double sphere_exit(Vec3 x1, Vec3 x2, double R) {
  const Vec3 d{x2.x - x1.x, x2.y - x1.y, x2.z - x1.z};
  const double A = d.x * d.x + d.y * d.y + d.z * d.z;
  const double B = x1.x * d.x + x1.y * d.y + x1.z * d.z;
  const double C = x1.x * x1.x + x1.y * x1.y + x1.z * x1.z - R * R;  // ≤ 0
  const double disc = std::max(0.0, B * B - A * C);
  return std::clamp((-B + std::sqrt(disc)) / A, 0.0, 1.0);
}

struct StepOutcome {
  bool absorbed = false;
  double fraction = 1.0;  // part of the step elapsed before absorption
};

// One step for each geometry. On return `x` holds the new position unless
// the path was absorbed.
struct Stepper {
  double D;
  double dt;
  bool bridge;

  bool bridge_kill(double d1, double d2, PathStream& rng) const {
    if (!bridge || d1 <= 0.0 || d2 <= 0.0) return false;
    const double expo = d1 * d2 / (D * dt);
    if (expo > 40.0) return false;
    return rng.uniform() < std::exp(-expo);
  }

  StepOutcome operator()(const BallWithCap& g, Vec3& x, Vec3 step, PathStream& rng) const {
    const double R = g.R;
    const double cos_eps = std::cos(g.eps);
    const bool has_window = g.eps > 0.0;
    Vec3 y{x.x + step.x, x.y + step.y, x.z + step.z};
    double r2 = y.x * y.x + y.y * y.y + y.z * y.z;
    if (r2 > R * R) {
      const double s = sphere_exit(x, y, R);
      const Vec3 p{x.x + s * step.x, x.y + s * step.y, x.z + s * step.z};
      // The overshoot also sweeps the boundary between p and the radial
      // projection of y; a step that ends over the cap is absorbed too.
      if (has_window && (p.z > R * cos_eps || y.z > std::sqrt(r2) * cos_eps)) return {true, s};
      y = mirror(y, p, {p.x / R, p.y / R, p.z / R});
      r2 = y.x * y.x + y.y * y.y + y.z * y.z;
      if (r2 > R * R) {  // grazing reflection; pull back onto the inside
        const double scale = R * (1.0 - 1e-12) / std::sqrt(r2);
        y = {y.x * scale, y.y * scale, y.z * scale};
      }
      x = y;
      return {};
    }
    if (has_window) {
      const double xr = std::sqrt(x.x * x.x + x.y * x.y + x.z * x.z);
      const double yr = std::sqrt(r2);
      const Vec3 m{0.5 * (x.x + y.x), 0.5 * (x.y + y.y), 0.5 * (x.z + y.z)};
      const double mr = std::sqrt(m.x * m.x + m.y * m.y + m.z * m.z);
      if (m.z > mr * cos_eps || x.z > xr * cos_eps || y.z > yr * cos_eps) {
        if (bridge_kill(R - xr, R - yr, rng)) return {true, 0.5};
      }
    }
    x = y;
    return {};
  }

  StepOutcome operator()(const CylinderAxial& g, Vec3& x, Vec3 step, PathStream& rng) const {
    Vec3 y{x.x + step.x, x.y + step.y, x.z + step.z};
    if (y.z <= 0.0) return {true, x.z / (x.z - y.z)};
    if (bridge_kill(x.z, y.z, rng)) return {true, 0.5};
    if (y.z > g.L) y.z = 2.0 * g.L - y.z;
    const double rr = y.x * y.x + y.y * y.y;
    if (rr > g.radius * g.radius) {
      // Reflect across the tangent plane of the lateral wall at the crossing.
      const Vec3 flat_x{x.x, x.y, 0.0};
      const Vec3 flat_y{y.x, y.y, 0.0};
      const double s = sphere_exit(flat_x, flat_y, g.radius);
      const Vec3 p{x.x + s * (y.x - x.x), x.y + s * (y.y - x.y), 0.0};
      const Vec3 n{p.x / g.radius, p.y / g.radius, 0.0};
      const Vec3 m = mirror({y.x, y.y, 0.0}, p, n);
      y.x = m.x;
      y.y = m.y;
      const double r2 = y.x * y.x + y.y * y.y;
      if (r2 > g.radius * g.radius) {
        const double scale = g.radius * (1.0 - 1e-12) / std::sqrt(r2);
        y.x *= scale;
        y.y *= scale;
      }
    }
    y.z = std::clamp(y.z, 0.0, g.L);
    x = y;
    return {};
  }

  StepOutcome operator()(const BoxWithEllipticWindow& g, Vec3& x, Vec3 step, PathStream& rng) const {
    const double cx = 0.5 * g.Lx;
    const double cy = 0.5 * g.Ly;
    auto in_window = [&](double px, double py) {
      const double u = (px - cx) / g.a;
      const double v = (py - cy) / g.b;
      return u * u + v * v < 1.0;
    };
    Vec3 y{x.x + step.x, x.y + step.y, x.z + step.z};
    if (y.z < 0.0) {
      const double s = x.z / (x.z - y.z);
      if (in_window(x.x + s * step.x, x.y + s * step.y)) return {true, s};
      y.z = -y.z;
    } else if (in_window(0.5 * (x.x + y.x), 0.5 * (x.y + y.y)) && bridge_kill(x.z, y.z, rng)) {
      return {true, 0.5};
    }
    auto fold = [](double v, double L) {
      // Reflect into [0, L]; steps are far shorter than L, so this settles fast.
      for (int it = 0; it < 8 && (v < 0.0 || v > L); ++it) v = v < 0.0 ? -v : 2.0 * L - v;
      return std::clamp(v, 0.0, L);
    };
    y.x = fold(y.x, g.Lx);
    y.y = fold(y.y, g.Ly);
    y.z = fold(y.z, g.Lz);
    x = y;
    return {};
  }
};

}  // namespace detail

/// Default time step: a tenth of the window size per step for the ball and the
/// box, L/100 for the cylinder.
inline double default_dt(const SimGeometry& g, double D) {
  detail::require(D > 0.0, "default_dt: diffusion coefficient must be positive");
  const double feature = std::holds_alternative<CylinderAxial>(g) ? detail::feature_length(g) / 100.0
                                                                   : detail::feature_length(g) / 10.0;
  return feature * feature / (2.0 * D);
}

namespace detail {

// First-passage time of path i, or NaN if censored at max_steps.
template <class G>
double run_path(const G& geometry, const SimConfig& cfg, const Stepper& stepper, double sigma,
                std::uint64_t i) {
  PathStream rng(cfg.seed, i);
  Vec3 x = cfg.start == StartRule::uniform ? sample_uniform(cfg.geometry, rng) : cfg.start_point;
  for (std::int64_t n = 0; n < cfg.max_steps; ++n) {
    const Vec3 step{sigma * rng.normal(), sigma * rng.normal(), sigma * rng.normal()};
    const StepOutcome out = stepper(geometry, x, step, rng);
    if (out.absorbed) return (static_cast<double>(n) + out.fraction) * stepper.dt;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// Per-path first-passage times (NaN for censored paths), in path order.
inline std::vector<double> simulate_paths(const SimConfig& cfg, double dt) {
  const detail::Stepper stepper{cfg.diffusion, dt, cfg.bridge_correction};
  const double sigma = std::sqrt(2.0 * cfg.diffusion * dt);
  std::vector<double> times(static_cast<std::size_t>(cfg.n_paths));

  constexpr std::int64_t batch = 256;
  const std::int64_t n_batches = (cfg.n_paths + batch - 1) / batch;
  std::atomic<std::int64_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::int64_t k = next.fetch_add(1);
      if (k >= n_batches) return;
      const std::int64_t end = std::min(cfg.n_paths, (k + 1) * batch);
      std::visit(
          [&](const auto& g) {
            for (std::int64_t i = k * batch; i < end; ++i) {
              times[static_cast<std::size_t>(i)] =
                  detail::run_path(g, cfg, stepper, sigma, static_cast<std::uint64_t>(i));
            }
          },
          cfg.geometry);
    }
  };

  int workers = cfg.workers > 0 ? cfg.workers : static_cast<int>(std::thread::hardware_concurrency());
  workers = static_cast<int>(std::clamp<std::int64_t>(workers, 1, std::max<std::int64_t>(1, n_batches)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return times;
}

inline SimResult simulate(const SimConfig& cfg) {
  detail::validate_geometry(cfg.geometry);
  detail::require(cfg.diffusion > 0.0, "simulate: diffusion coefficient must be positive");
  detail::require(cfg.n_paths > 0, "simulate: n_paths must be positive");
  detail::require(cfg.max_steps > 0, "simulate: max_steps must be positive");
  detail::require(cfg.dt >= 0.0, "simulate: dt must be nonnegative");
  if (cfg.start == StartRule::fixed_point) {
    detail::require(detail::inside(cfg.geometry, cfg.start_point), "simulate: start point lies outside the domain");
  }

  const auto t0 = std::chrono::steady_clock::now();
  SimResult res;
  res.dt_used = cfg.dt > 0.0 ? cfg.dt : default_dt(cfg.geometry, cfg.diffusion);
  if (std::sqrt(2.0 * cfg.diffusion * res.dt_used) > 0.1 * detail::feature_length(cfg.geometry)) {
    res.warnings.push_back("step length exceeds a tenth of the window size; expect discretization bias");
  }

  const std::vector<double> times = simulate_paths(cfg, res.dt_used);

  // Fixed-order reductions keep the result independent of scheduling.
  double sum = 0.0;
  for (double t : times) {
    if (std::isnan(t)) {
      ++res.n_censored;
    } else {
      ++res.n_absorbed;
      sum += t;
    }
  }
  if (res.n_absorbed > 0) {
    res.mean = sum / static_cast<double>(res.n_absorbed);
    double ss = 0.0;
    for (double t : times) {
      if (!std::isnan(t)) ss += (t - res.mean) * (t - res.mean);
    }
    const double var = res.n_absorbed > 1 ? ss / static_cast<double>(res.n_absorbed - 1) : 0.0;
    res.stderr_ = std::sqrt(var / static_cast<double>(res.n_absorbed));
  } else {
    res.mean = std::numeric_limits<double>::quiet_NaN();
    res.stderr_ = std::numeric_limits<double>::quiet_NaN();
  }
  if (res.n_censored > 0.01 * static_cast<double>(cfg.n_paths)) {
    res.unreliable = true;
    res.warnings.push_back("more than 1% of paths reached max_steps; the mean excludes them");
  }
  res.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// ---------------------------------------------------------------------------
// Time-step study

struct SweepRow {
  double dt = 0.0;
  SimResult result;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  double extrapolated = 0.0;  // m₀ in the fit mean ≈ m₀ + c √dt
  double extrapolated_stderr = 0.0;
  double slope = 0.0;
};

inline SweepReport convergence_sweep(const SimConfig& cfg, const std::vector<double>& dt_levels) {
  detail::require(cfg.n_paths > 0, "convergence_sweep: n_paths must be positive");
  detail::require(dt_levels.size() >= 3, "convergence_sweep: need at least three time steps");
  for (double dt : dt_levels) detail::require(dt > 0.0, "convergence_sweep: time steps must be positive");
  const double ratio = dt_levels[1] / dt_levels[0];
  for (std::size_t k = 1; k < dt_levels.size(); ++k) {
    const double r = dt_levels[k] / dt_levels[k - 1];
    detail::require(std::abs(r / ratio - 1.0) < 1e-6 && std::abs(r - 1.0) > 1e-6,
                    "convergence_sweep: time steps must be geometrically spaced");
  }

  SweepReport rep;
  // Weighted least squares for mean = m0 + c·√dt, weights 1/stderr².
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, sy = 0.0, sxy = 0.0;
  for (double dt : dt_levels) {
    SimConfig c = cfg;
    c.dt = dt;
    SweepRow row{dt, simulate(c)};
    const double w = 1.0 / std::max(row.result.stderr_ * row.result.stderr_, 1e-300);
    const double x = std::sqrt(dt);
    s0 += w;
    s1 += w * x;
    s2 += w * x * x;
    sy += w * row.result.mean;
    sxy += w * x * row.result.mean;
    rep.rows.push_back(std::move(row));
  }
  const double det = s0 * s2 - s1 * s1;
  rep.slope = (s0 * sxy - s1 * sy) / det;
  rep.extrapolated = (s2 * sy - s1 * sxy) / det;
  rep.extrapolated_stderr = std::sqrt(s2 / det);
  return rep;
}

// ---------------------------------------------------------------------------
// Comparison with closed-form results

struct TheoryRow {
  std::string name;
  double value = 0.0;
  double relative_gap = 0.0;  // (theory − MC) / MC
};

struct TheoryComparison {
  SimResult mc;
  std::vector<TheoryRow> rows;
};

/// Theory values for a configuration, without running the simulation.
inline std::vector<TheoryRow> theory_values(const SimConfig& cfg) {
  detail::validate_geometry(cfg.geometry);
  const double D = cfg.diffusion;
  std::vector<TheoryRow> rows;
  std::visit(
      [&](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, BallWithCap>) {
          if (g.eps <= 0.0) throw DomainError("compare_with_theory: a ball without window has no finite MFPT");
          const double a = g.R * std::sin(g.eps);
          const MediumSpec medium(detail::volume(cfg.geometry), D);
          rows.push_back({"leading", mfpt_circular(medium, a).value, 0.0});
          rows.push_back({"two-term", mfpt_sphere_two_term(g.R, a, D).value, 0.0});
        } else if constexpr (std::is_same_v<T, CylinderAxial>) {
          // v(z) = (L z − z²/2)/D; its average over the length is L²/(3D).
          if (cfg.start == StartRule::uniform) {
            rows.push_back({"exact", g.L * g.L / (3.0 * D), 0.0});
          } else {
            const double z = cfg.start_point.z;
            rows.push_back({"exact", (g.L * z - 0.5 * z * z) / D, 0.0});
          }
        } else {
          const MediumSpec medium(detail::volume(cfg.geometry), D);
          rows.push_back({"leading", mfpt_elliptic(medium, WindowEllipse(g.a, g.b)).value, 0.0});
        }
      },
      cfg.geometry);
  return rows;
}

inline TheoryComparison compare_with_theory(const SimConfig& cfg) {
  TheoryComparison out;
  out.rows = theory_values(cfg);
  out.mc = simulate(cfg);
  for (auto& row : out.rows) row.relative_gap = (row.value - out.mc.mean) / out.mc.mean;
  return out;
}

}  // namespace narrow_escape
