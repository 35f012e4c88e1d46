#pragma once

// Machine-readable simulation records. JSON and CSV share one schema:
//   geometry, params, mean, stderr, n_absorbed, n_censored, dt, seed, elapsed_s
// In CSV the params column holds the parameters as compact JSON.

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "narrow_escape/brownian.hpp"

namespace narrow_escape {

inline const std::vector<std::string>& sim_record_columns() {
  static const std::vector<std::string> cols{"geometry", "params",     "mean", "stderr",   "n_absorbed",
                                             "n_censored", "dt", "seed", "elapsed_s"};
  return cols;
}

inline nlohmann::json geometry_params(const SimConfig& cfg) {
  nlohmann::json p = std::visit(
      [](const auto& g) -> nlohmann::json {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, BallWithCap>) {
          return {{"R", g.R}, {"eps", g.eps}};
        } else if constexpr (std::is_same_v<T, CylinderAxial>) {
          return {{"L", g.L}, {"radius", g.radius}};
        } else {
          return {{"Lx", g.Lx}, {"Ly", g.Ly}, {"Lz", g.Lz}, {"a", g.a}, {"b", g.b}};
        }
      },
      cfg.geometry);
  p["D"] = cfg.diffusion;
  p["n_paths"] = cfg.n_paths;
  p["max_steps"] = cfg.max_steps;
  p["bridge"] = cfg.bridge_correction;
  if (cfg.start == StartRule::uniform) {
    p["start"] = "uniform";
  } else {
    p["start"] = "fixed";
    p["x0"] = {cfg.start_point.x, cfg.start_point.y, cfg.start_point.z};
  }
  return p;
}

// NaN (no absorbed paths) is written as null.
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json sim_record(const SimConfig& cfg, const SimResult& res) {
  return {{"geometry", geometry_name(cfg.geometry)},
          {"params", geometry_params(cfg)},
          {"mean", finite_or_null(res.mean)},
          {"stderr", finite_or_null(res.stderr_)},
          {"n_absorbed", res.n_absorbed},
          {"n_censored", res.n_censored},
          {"dt", res.dt_used},
          {"seed", cfg.seed},
          {"elapsed_s", res.elapsed}};
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string csv_cell(const nlohmann::json& v) {
  if (v.is_string()) return csv_escape(v.get<std::string>());
  if (v.is_null()) return "";
  return csv_escape(v.dump());
}

}  // namespace detail

inline void write_csv_header(std::ostream& os, const std::vector<std::string>& columns) {
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& columns, const nlohmann::json& record) {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    os << (i ? "," : "");
    if (record.contains(columns[i])) os << detail::csv_cell(record.at(columns[i]));
  }
  os << '\n';
}

}  // namespace narrow_escape
