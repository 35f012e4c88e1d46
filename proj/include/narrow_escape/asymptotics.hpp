#pragma once

// Closed-form MFPT formulas: general elliptic window, circular window, the
// squeezed (e -> 1) limit, the two-term ball formula, the chamber-plus-channel
// composite, and the mean ion arrival time.
//
// The library is unit-agnostic; callers must use one consistent system
// (lengths L, volumes L^3, diffusion L^2/T, times T).

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "narrow_escape/common.hpp"
#include "narrow_escape/numerics.hpp"

namespace narrow_escape {

struct WindowEllipse {
  double a = 0.0;  // large semi-axis
  double b = 0.0;  // small semi-axis

  WindowEllipse() = default;
  WindowEllipse(double a_, double b_) : a(a_), b(b_) {
    detail::require(b > 0.0 && b <= a, "WindowEllipse: need 0 < b <= a");
  }

  static WindowEllipse circle(double radius) { return {radius, radius}; }

  /// Ellipse with large semi-axis a and eccentricity e.
  static WindowEllipse from_eccentricity(double a, double e) {
    detail::require(e >= 0.0 && e < 1.0, "WindowEllipse: eccentricity must lie in [0, 1)");
    return {a, a * std::sqrt((1.0 - e) * (1.0 + e))};
  }

  /// Ellipse of the given area and eccentricity.
  static WindowEllipse from_area(double area, double e) {
    detail::require(area > 0.0, "WindowEllipse: area must be positive");
    detail::require(e >= 0.0 && e < 1.0, "WindowEllipse: eccentricity must lie in [0, 1)");
    const double a = std::sqrt(area / pi) / std::pow((1.0 - e) * (1.0 + e), 0.25);
    return from_eccentricity(a, e);
  }

  double eccentricity() const {
    const double q = b / a;
    return a == b ? 0.0 : std::sqrt((1.0 - q) * (1.0 + q));
  }
  double area() const { return pi * a * b; }
};

struct MediumSpec {
  double volume = 0.0;
  double diffusion = 1.0;

  MediumSpec() = default;
  MediumSpec(double v, double d) : volume(v), diffusion(d) {
    detail::require(volume > 0.0, "MediumSpec: volume must be positive");
    detail::require(diffusion > 0.0, "MediumSpec: diffusion coefficient must be positive");
  }
};

enum class Regime { general_elliptic, circular, squeezed, sphere_two_term, composite_channel };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::general_elliptic: return "general-elliptic";
    case Regime::circular: return "circular";
    case Regime::squeezed: return "squeezed";
    case Regime::sphere_two_term: return "sphere-two-term";
    case Regime::composite_channel: return "composite-channel";
  }
  return "unknown";
}

struct AsymptoticMFPT {
  double value = 0.0;
  Regime regime = Regime::general_elliptic;
  std::map<std::string, double> correction_terms;
  std::vector<std::string> warnings;
};

namespace detail {

inline void check_medium(const MediumSpec& m) {
  require(m.volume > 0.0, "volume must be positive");
  require(m.diffusion > 0.0, "diffusion coefficient must be positive");
}

inline void check_window(const WindowEllipse& w) {
  require(w.b > 0.0 && w.b <= w.a, "window needs 0 < b <= a");
}

// A window is "small" when its size is well below the domain scale. No sharp
// threshold exists, so this only warns.
inline void warn_if_large(std::vector<std::string>& warnings, double a, double volume) {
  if (a > 0.1 * std::cbrt(volume)) {
    warnings.push_back("window semi-axis is not small compared with volume^(1/3); the formula is asymptotic");
  }
}

}  // namespace detail

/// |Ω| K(e) / (2π D a).
inline AsymptoticMFPT mfpt_elliptic(const MediumSpec& medium, const WindowEllipse& win) {
  detail::check_medium(medium);
  detail::check_window(win);
  AsymptoticMFPT out;
  out.regime = Regime::general_elliptic;
  const double K = elliptic_K(win.eccentricity());
  out.value = medium.volume * K / (2.0 * pi * medium.diffusion * win.a);
  out.correction_terms["leading"] = out.value;
  out.correction_terms["K(e)"] = K;
  detail::warn_if_large(out.warnings, win.a, medium.volume);
  return out;
}

/// |Ω| / (4 a D).
inline AsymptoticMFPT mfpt_circular(const MediumSpec& medium, double a) {
  detail::check_medium(medium);
  detail::require(a > 0.0, "mfpt_circular: hole radius must be positive");
  AsymptoticMFPT out;
  out.regime = Regime::circular;
  out.value = medium.volume / (4.0 * a * medium.diffusion);
  out.correction_terms["leading"] = out.value;
  detail::warn_if_large(out.warnings, a, medium.volume);
  return out;
}

/// Squeezed limit e -> 1: |Ω| log(16/(1 − e)) / (4π D a).
inline AsymptoticMFPT mfpt_squeezed(const MediumSpec& medium, const WindowEllipse& win) {
  detail::check_medium(medium);
  detail::check_window(win);
  const double e = win.eccentricity();
  AsymptoticMFPT out;
  out.regime = Regime::squeezed;
  const double log_term = std::log(16.0 / (1.0 - e));
  out.value = medium.volume * log_term / (4.0 * pi * medium.diffusion * win.a);
  out.correction_terms["log(16/(1-e))"] = log_term;
  if (e < 0.9) out.warnings.push_back("eccentricity below 0.9; the squeezed limit is inaccurate");
  detail::warn_if_large(out.warnings, win.a, medium.volume);
  return out;
}

/// Squeezed limit written in terms of the window area S:
/// 2^{1/4} |Ω| (1 − e)^{1/4} log(16/(1 − e)) / (4 D √(π S)).
///
/// This replaces (1 + e)^{1/4} by its limit 2^{1/4}, so it differs from
/// mfpt_squeezed at the matching semi-axis by the factor (2/(1 + e))^{1/4}.
inline AsymptoticMFPT mfpt_squeezed_by_area(const MediumSpec& medium, double area, double e) {
  detail::check_medium(medium);
  detail::require(area > 0.0, "mfpt_squeezed_by_area: area must be positive");
  detail::require(e >= 0.0 && e <= 1.0, "mfpt_squeezed_by_area: eccentricity must lie in [0, 1)");
  if (e == 1.0) throw DivergenceError("mfpt_squeezed_by_area: log(16/(1 - e)) diverges at e = 1");
  AsymptoticMFPT out;
  out.regime = Regime::squeezed;
  const double log_term = std::log(16.0 / (1.0 - e));
  const double shape = std::pow(2.0 * (1.0 - e), 0.25);
  out.value = medium.volume * shape * log_term / (4.0 * medium.diffusion * std::sqrt(pi * area));
  out.correction_terms["log(16/(1-e))"] = log_term;
  out.correction_terms["(2(1-e))^(1/4)"] = shape;
  if (e < 0.9) out.warnings.push_back("eccentricity below 0.9; the squeezed limit is inaccurate");
  return out;
}

/// Ball of radius R with a circular cap of radius a:
/// (V / 4aD) [1 + (a/R) log(R/a)], V = 4πR³/3.
inline AsymptoticMFPT mfpt_sphere_two_term(double R, double a, double D) {
  detail::require(R > 0.0 && D > 0.0, "mfpt_sphere_two_term: R and D must be positive");
  detail::require(a > 0.0, "mfpt_sphere_two_term: cap radius must be positive");
  detail::require(a < R, "mfpt_sphere_two_term: cap radius must be smaller than R");
  AsymptoticMFPT out;
  out.regime = Regime::sphere_two_term;
  const double volume = 4.0 * pi * R * R * R / 3.0;
  const double leading = volume / (4.0 * a * D);
  const double bracket = 1.0 + (a / R) * std::log(R / a);
  out.value = leading * bracket;
  out.correction_terms["leading"] = leading;
  out.correction_terms["bracket"] = bracket;
  return out;
}

/// Chamber of volume V joined to a channel of length L by a hole of radius a:
/// V/(4aD) + L²/(2D).
inline AsymptoticMFPT mfpt_composite_channel(double V, double D, double a, double L) {
  detail::require(V >= 0.0 && L >= 0.0, "mfpt_composite_channel: V and L must be nonnegative");
  detail::require(D > 0.0 && a > 0.0, "mfpt_composite_channel: D and a must be positive");
  AsymptoticMFPT out;
  out.regime = Regime::composite_channel;
  const double chamber = V / (4.0 * a * D);
  const double channel = L * L / (2.0 * D);
  out.value = chamber + channel;
  out.correction_terms["chamber"] = chamber;
  out.correction_terms["channel"] = channel;
  return out;
}

struct ArrivalTime {
  double mean_time = 0.0;     // 1 / (4 D a C)
  double forward_rate = 0.0;  // 4 D a C
};

/// Mean time between arrivals at a hole of radius a from a bath at number
/// concentration C (particles per unit volume).
inline ArrivalTime mean_arrival_time(double D, double a, double C) {
  detail::require(D > 0.0 && a > 0.0 && C > 0.0, "mean_arrival_time: inputs must be positive");
  ArrivalTime out;
  out.forward_rate = 4.0 * D * a * C;
  out.mean_time = 1.0 / out.forward_rate;
  return out;
}

inline constexpr double avogadro = 6.02214076e23;

/// Molar concentration (mol/L) to number density per cubic metre.
inline double molar_to_number_density(double molar) { return molar * 1e3 * avogadro; }

}  // namespace narrow_escape
