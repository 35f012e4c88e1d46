#pragma once

// necli: command-line front end.
//
//   necli [--out FILE] [--format json|csv] [--append] <command> [flags]
//   necli --replay FILE [--out FILE] [--format json|csv]
//
// Every output embeds the fully resolved configuration of the run; --replay
// re-runs it. Exit codes: 0 success, 2 usage or domain error, 3 solver failure.
// Errors are reported as a single line "error: <kind>: <reason>" on stderr.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "narrow_escape/asymptotics.hpp"
#include "narrow_escape/brownian.hpp"
#include "narrow_escape/collins.hpp"
#include "narrow_escape/sim_io.hpp"
#include "narrow_escape/spectral.hpp"
#include "narrow_escape/window.hpp"

namespace narrow_escape::cli {

using json = nlohmann::json;

inline constexpr int schema_version = 1;
inline constexpr const char* output_dir_env = "NARROW_ESCAPE_OUTPUT_DIR";

// Result of one command: resolved config, CSV columns and records.
struct Table {
  json config = json::object();
  std::vector<std::string> columns;
  std::vector<json> records;
  std::vector<std::string> warnings;
};

namespace detail {

inline json num(double v) { return std::isfinite(v) ? json(v) : json(); }

inline void add_warnings(Table& t, const std::vector<std::string>& w) {
  for (const auto& s : w) {
    if (std::find(t.warnings.begin(), t.warnings.end(), s) == t.warnings.end()) t.warnings.push_back(s);
  }
}

inline std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

// Flags given explicitly on the command line.
class Given {
 public:
  explicit Given(const CLI::App* app) : app_(app) {}
  bool operator()(const std::string& name) const { return app_->get_option("--" + name)->count() > 0; }

  // Rejects explicitly given flags outside `allowed`.
  void only(const std::set<std::string>& allowed, const std::string& context) const {
    for (const CLI::Option* opt : app_->get_options()) {
      const std::string name = opt->get_single_name();
      if (name == "help" || opt->count() == 0) continue;
      if (!allowed.count(name)) throw DomainError("--" + name + " does not apply to " + context);
    }
  }

 private:
  const CLI::App* app_;
};

}  // namespace detail

// Flag values of all commands; every subcommand binds into this.
struct Flags {
  // asym
  std::string shape = "circle";
  double V = 1.0, D = 1.0, a = 0.0, b = 0.0, e = 0.0, S = 0.0, R = 1.0, L = 1.0, C_molar = 0.0;
  // sphere / norms
  std::vector<double> ratios{0.01, 0.02, 0.05, 0.1, 0.2};
  std::vector<double> eps_list{0.01, 0.02, 0.05, 0.1, 0.2};
  // collins / spectral
  double eps = 0.2;
  int nquad = 200;
  int nseries = 1000;
  bool zero_kernel = false;
  int N = 64;
  int M = 0;
  // window
  int n = 24;
  int check = 64;
  int check_resolution = 32;
  std::string mesh, export_mesh;
  // simulate / compare
  std::string geometry = "ball";
  double radius = 1.0, Lx = 1.0, Ly = 1.0, Lz = 1.0;
  double dt = 0.0;
  std::int64_t paths = 10000;
  std::uint64_t seed = 1;
  std::int64_t max_steps = 100000000;
  std::string start = "uniform";
  std::vector<double> x0;
  int workers = 0;
  bool no_bridge = false;
  int window_n = 16;
};

// ---------------------------------------------------------------------------
// Commands

inline Table cmd_asym(const Flags& f, const detail::Given& given) {
  Table t;
  t.columns = {"shape", "regime", "value", "terms"};
  t.config["shape"] = f.shape;
  auto need = [&](const std::string& name, double value) {
    if (!given(name)) throw DomainError("asym --shape " + f.shape + " requires --" + name);
    t.config[name] = value;
    return value;
  };
  auto medium = [&] {
    const double V = need("V", f.V);
    t.config["D"] = f.D;
    return MediumSpec(V, f.D);
  };
  // Window from (a, b) or (a, e).
  auto window = [&] {
    const double a = need("a", f.a);
    if (given("b") && given("e")) throw DomainError("asym: give either --b or --e, not both");
    if (given("e")) {
      t.config["e"] = f.e;
      return WindowEllipse::from_eccentricity(a, f.e);
    }
    const double b = need("b", f.b);
    return WindowEllipse(a, b);
  };

  AsymptoticMFPT res;
  if (f.shape == "circle") {
    given.only({"shape", "V", "D", "a"}, "asym --shape circle");
    const MediumSpec m = medium();
    res = mfpt_circular(m, need("a", f.a));
  } else if (f.shape == "ellipse" || f.shape == "squeezed") {
    given.only({"shape", "V", "D", "a", "b", "e"}, "asym --shape " + f.shape);
    const MediumSpec m = medium();
    const WindowEllipse w = window();
    res = f.shape == "ellipse" ? mfpt_elliptic(m, w) : mfpt_squeezed(m, w);
  } else if (f.shape == "squeezed-area") {
    given.only({"shape", "V", "D", "S", "e"}, "asym --shape squeezed-area");
    const MediumSpec m = medium();
    const double S = need("S", f.S);
    res = mfpt_squeezed_by_area(m, S, need("e", f.e));
  } else if (f.shape == "sphere") {
    given.only({"shape", "R", "D", "a"}, "asym --shape sphere");
    t.config["R"] = f.R;
    t.config["D"] = f.D;
    res = mfpt_sphere_two_term(f.R, need("a", f.a), f.D);
  } else if (f.shape == "channel") {
    given.only({"shape", "V", "D", "a", "L"}, "asym --shape channel");
    const MediumSpec m = medium();
    const double a = need("a", f.a);
    res = mfpt_composite_channel(m.volume, m.diffusion, a, need("L", f.L));
  } else {  // arrival
    given.only({"shape", "D", "a", "C-molar"}, "asym --shape arrival");
    t.config["D"] = f.D;
    const double a = need("a", f.a);
    const double C = need("C-molar", f.C_molar);
    const ArrivalTime at = mean_arrival_time(f.D, a, molar_to_number_density(C));
    t.records.push_back({{"shape", f.shape},
                         {"regime", "arrival"},
                         {"value", at.mean_time},
                         {"terms", {{"forward_rate", at.forward_rate}, {"number_density", molar_to_number_density(C)}}}});
    return t;
  }
  json terms = json::object();
  for (const auto& [k, v] : res.correction_terms) terms[k] = v;
  t.records.push_back({{"shape", f.shape}, {"regime", to_string(res.regime)}, {"value", res.value}, {"terms", terms}});
  detail::add_warnings(t, res.warnings);
  return t;
}

inline Table cmd_sphere(const Flags& f, const detail::Given&) {
  Table t;
  t.columns = {"a_over_R", "a", "leading", "two_term", "bracket"};
  t.config = {{"R", f.R}, {"D", f.D}, {"ratios", f.ratios}};
  narrow_escape::detail::require(!f.ratios.empty(), "sphere: --ratios is empty");
  for (double ratio : f.ratios) {
    const double a = ratio * f.R;
    const AsymptoticMFPT res = mfpt_sphere_two_term(f.R, a, f.D);
    t.records.push_back({{"a_over_R", ratio},
                         {"a", a},
                         {"leading", res.correction_terms.at("leading")},
                         {"two_term", res.value},
                         {"bracket", res.correction_terms.at("bracket")}});
    detail::add_warnings(t, res.warnings);
  }
  return t;
}

inline Table cmd_collins(const Flags& f, const detail::Given&) {
  Table t;
  t.columns = {"R",          "eps",      "b0",         "leading",      "c_factor",   "mfpt_center", "mfpt_average",
               "rel_correction", "ratio", "operator_norm", "norm_bound", "double_integral_ratio"};
  t.config = {{"R", f.R}, {"eps", f.eps}, {"nquad", f.nquad}, {"nseries", f.nseries}, {"zero-kernel", f.zero_kernel}};
  CollinsConfig cfg;
  cfg.R = f.R;
  cfg.eps = f.eps;
  cfg.n_quad = f.nquad;
  cfg.n_series = f.nseries;
  cfg.zero_kernel = f.zero_kernel;
  const B0Result res = solve_b0(cfg);
  detail::add_warnings(t, res.warnings);

  const double rel = relative_correction(res.b0, f.R, f.eps);
  const bool small = f.eps < 1.0;
  const double log_term = small ? f.eps * std::log(1.0 / f.eps) : NAN;
  t.records.push_back({{"R", f.R},
                       {"eps", f.eps},
                       {"b0", res.b0},
                       {"leading", res.leading},
                       {"c_factor", res.c_factor},
                       {"mfpt_center", res.mfpt_center},
                       {"mfpt_average", res.b0 + f.R * f.R / 15.0},
                       {"rel_correction", rel},
                       {"ratio", detail::num(rel / log_term)},
                       {"operator_norm", operator_norm(cfg)},
                       {"norm_bound", small ? json(operator_norm_bound(f.eps)) : json()},
                       {"double_integral_ratio", f.eps < 0.5 ? json(double_integral_check(f.eps).ratio) : json()}});
  return t;
}

inline Table cmd_spectral(const Flags& f, const detail::Given&) {
  Table t;
  t.columns = {"R",           "eps",        "N",           "M",          "a0",
               "mfpt_center", "mfpt_average", "mfpt_average_quadrature", "residual_dirichlet",
               "residual_neumann", "residual_flux", "radial_derivative_antipode"};
  const int M = f.M > 0 ? f.M : 4 * f.N;
  t.config = {{"R", f.R}, {"eps", f.eps}, {"N", f.N}, {"M", M}};
  const LegendreSeriesSolution sol = solve_dual_series(f.R, f.eps, f.N, M);
  const AverageMFPT avg = average_mfpt(sol);
  t.records.push_back({{"R", f.R},
                       {"eps", f.eps},
                       {"N", f.N},
                       {"M", M},
                       {"a0", sol.coeffs[0]},
                       {"mfpt_center", avg.center},
                       {"mfpt_average", avg.analytic},
                       {"mfpt_average_quadrature", avg.quadrature},
                       {"residual_dirichlet", sol.residual_dirichlet},
                       {"residual_neumann", sol.residual_neumann},
                       {"residual_flux", sol.residual_flux},
                       {"radial_derivative_antipode", boundary_radial_derivative(sol, pi)}});
  return t;
}

inline Table cmd_window(const Flags& f, const detail::Given& given) {
  Table t;
  t.columns = {"a",         "b",         "elements",     "C0",           "C0_exact",
               "C0_rel_error", "total_flux", "flux_ratio_half", "potential_max_deviation"};
  PlanarWindowMesh mesh;
  const bool imported = given("mesh");
  if (imported) {
    given.only({"mesh", "V", "D", "export-mesh"}, "window --mesh");
    std::ifstream in(f.mesh);
    if (!in) throw DomainError("window: cannot open mesh file " + f.mesh);
    mesh = read_mesh(in);
    t.config["mesh"] = f.mesh;
  } else {
    if (given("b") && given("e")) throw DomainError("window: give either --b or --e, not both");
    const WindowEllipse w = given("e") ? WindowEllipse::from_eccentricity(f.a, f.e)
                                       : WindowEllipse(f.a, given("b") ? f.b : f.a);
    mesh = build_ellipse_mesh(w.a, w.b, f.n);
    t.config["a"] = w.a;
    t.config["b"] = w.b;
    t.config["n"] = f.n;
    t.config["check"] = f.check;
    t.config["check-resolution"] = f.check_resolution;
  }
  t.config["V"] = f.V;
  t.config["D"] = f.D;
  if (given("export-mesh")) {
    std::ofstream os(f.export_mesh);
    if (!os) throw DomainError("window: cannot write mesh file " + f.export_mesh);
    write_mesh(os, mesh);
    t.config["export-mesh"] = f.export_mesh;
  }

  const FluxSolution sol = solve_window_ie(mesh, f.V, f.D);
  detail::add_warnings(t, sol.warnings);
  json rec = {{"a", detail::num(mesh.a)}, {"b", detail::num(mesh.b)}, {"elements", mesh.size()},
              {"C0", sol.C0},          {"total_flux", sol.total_flux}};
  if (!imported) {
    const double exact = elliptic_C0(mesh.a, mesh.b, f.V, f.D);
    rec["C0_exact"] = exact;
    rec["C0_rel_error"] = sol.C0 / exact - 1.0;
    rec["flux_ratio_half"] = flux_at(mesh, sol, 0.5 * mesh.a, 0.0) / flux_at(mesh, sol, 0.0, 0.0);
    rec["potential_max_deviation"] =
        verify_constant_potential(mesh.a, mesh.b, f.check, f.check_resolution).max_deviation;
  }
  t.records.push_back(rec);
  return t;
}

// SimConfig from the flags; records the resolved values in `config`.
inline SimConfig sim_config(const Flags& f, const detail::Given& given, json& config,
                            const std::set<std::string>& extra_allowed) {
  std::set<std::string> allowed{"geometry", "D",       "dt",      "paths",     "seed",
                                "max-steps", "start", "x0",      "workers",   "no-bridge"};
  allowed.insert(extra_allowed.begin(), extra_allowed.end());
  SimConfig cfg;
  config["geometry"] = f.geometry;
  if (f.geometry == "ball") {
    allowed.insert({"R", "eps", "nquad", "N"});
    cfg.geometry = BallWithCap{f.R, f.eps};
    config["R"] = f.R;
    config["eps"] = f.eps;
  } else if (f.geometry == "cylinder") {
    allowed.insert({"L", "radius"});
    cfg.geometry = CylinderAxial{f.L, f.radius};
    config["L"] = f.L;
    config["radius"] = f.radius;
  } else {
    allowed.insert({"Lx", "Ly", "Lz", "a", "b", "e", "window-n"});
    if (given("b") && given("e")) throw DomainError("give either --b or --e, not both");
    const double a = given("a") ? f.a : 0.1;
    const WindowEllipse w = given("e") ? WindowEllipse::from_eccentricity(a, f.e)
                                       : WindowEllipse(a, given("b") ? f.b : a);
    cfg.geometry = BoxWithEllipticWindow{f.Lx, f.Ly, f.Lz, w.a, w.b};
    config["Lx"] = f.Lx;
    config["Ly"] = f.Ly;
    config["Lz"] = f.Lz;
    config["a"] = w.a;
    config["b"] = w.b;
  }
  given.only(allowed, std::string("geometry ") + f.geometry);

  cfg.diffusion = f.D;
  cfg.dt = f.dt;
  cfg.n_paths = f.paths;
  cfg.seed = f.seed;
  cfg.max_steps = f.max_steps;
  cfg.workers = f.workers;
  cfg.bridge_correction = !f.no_bridge;
  config["D"] = f.D;
  config["dt"] = f.dt > 0.0 ? f.dt : default_dt(cfg.geometry, f.D);
  config["paths"] = f.paths;
  config["seed"] = f.seed;
  config["max-steps"] = f.max_steps;
  config["workers"] = f.workers;
  config["no-bridge"] = f.no_bridge;
  config["start"] = f.start;
  if (f.start == "fixed") {
    if (f.x0.size() != 3) throw DomainError("--start fixed requires --x0 X Y Z");
    cfg.start = StartRule::fixed_point;
    cfg.start_point = {f.x0[0], f.x0[1], f.x0[2]};
    config["x0"] = f.x0;
  } else if (given("x0")) {
    throw DomainError("--x0 requires --start fixed");
  }
  cfg.dt = config["dt"].get<double>();
  return cfg;
}

inline Table cmd_simulate(const Flags& f, const detail::Given& given) {
  Table t;
  t.columns = sim_record_columns();
  const SimConfig cfg = sim_config(f, given, t.config, {});
  const SimResult res = simulate(cfg);
  detail::add_warnings(t, res.warnings);
  if (res.unreliable) detail::add_warnings(t, {"more than 1% of the paths were censored; the mean is unreliable"});
  t.records.push_back(sim_record(cfg, res));
  return t;
}

inline Table cmd_compare(const Flags& f, const detail::Given& given) {
  Table t;
  t.columns = {"geometry", "mc",      "mc_stderr",   "leading",  "leading_gap", "two_term",  "two_term_gap",
               "collins",  "collins_gap", "spectral", "spectral_gap", "exact",  "exact_gap", "window_ie",
               "window_ie_gap"};
  const SimConfig cfg = sim_config(f, given, t.config, {});
  const TheoryComparison cmp = compare_with_theory(cfg);
  detail::add_warnings(t, cmp.mc.warnings);
  const double mc = cmp.mc.mean;
  json rec = {{"geometry", f.geometry}, {"mc", detail::num(mc)}, {"mc_stderr", detail::num(cmp.mc.stderr_)}};
  auto put = [&](const std::string& key, double value) {
    rec[key] = detail::num(value);
    rec[key + "_gap"] = detail::num((value - mc) / mc);
  };
  for (const TheoryRow& row : cmp.rows) put(row.name == "two-term" ? "two_term" : row.name, row.value);

  if (f.geometry == "ball") {
    t.config["nquad"] = f.nquad;
    t.config["N"] = f.N;
    // Volume averages, matching the uniform start; collins and spectral work
    // with D = 1, so rescale.
    CollinsConfig cc;
    cc.R = f.R;
    cc.eps = f.eps;
    cc.n_quad = f.nquad;
    const B0Result b0 = solve_b0(cc);
    detail::add_warnings(t, b0.warnings);
    put("collins", (b0.b0 + f.R * f.R / 15.0) / f.D);
    const LegendreSeriesSolution sol = solve_dual_series(f.R, f.eps, f.N);
    put("spectral", average_mfpt(sol).analytic / f.D);
    if (cfg.start != StartRule::uniform) {
      detail::add_warnings(t, {"collins and spectral columns are volume averages; the MC start is fixed"});
    }
  } else if (f.geometry == "box") {
    t.config["window-n"] = f.window_n;
    const auto& box = std::get<BoxWithEllipticWindow>(cfg.geometry);
    const FluxSolution sol =
        solve_window_ie(build_ellipse_mesh(box.a, box.b, f.window_n), box.Lx * box.Ly * box.Lz, f.D);
    put("window_ie", sol.C0);
  }
  for (const auto& c : t.columns) {
    if (!rec.contains(c)) rec[c] = nullptr;
  }
  t.records.push_back(rec);
  return t;
}

inline Table cmd_norms(const Flags& f, const detail::Given&) {
  Table t;
  t.columns = {"eps", "operator_norm", "bound", "ratio"};
  t.config = {{"eps-list", f.eps_list}, {"nquad", f.nquad}};
  narrow_escape::detail::require(!f.eps_list.empty(), "norms: --eps-list is empty");
  for (double eps : f.eps_list) {
    CollinsConfig cfg;
    cfg.eps = eps;
    cfg.n_quad = f.nquad;
    const double norm = operator_norm(cfg);
    const double bound = operator_norm_bound(eps);
    t.records.push_back({{"eps", eps}, {"operator_norm", norm}, {"bound", bound}, {"ratio", norm / bound}});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Output

inline void write_json(std::ostream& os, const std::string& command, const Table& t) {
  json env = {{"tool", "necli"},           {"version", version}, {"schema", schema_version},
              {"command", command},        {"config", t.config}, {"records", t.records},
              {"warnings", t.warnings}};
  os << env.dump(2) << '\n';
}

inline void write_csv(std::ostream& os, const std::string& command, const Table& t, bool header) {
  if (header) {
    os << "# tool: necli\n# version: " << version << "\n# schema: " << schema_version << "\n# command: " << command
       << "\n# config: " << t.config.dump() << '\n';
    for (const auto& w : t.warnings) os << "# warning: " << detail::one_line(w) << '\n';
    write_csv_header(os, t.columns);
  }
  for (const auto& rec : t.records) write_csv_row(os, t.columns, rec);
}

// Command and config embedded in a previous output file.
inline std::pair<std::string, json> read_replay(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("replay: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json env;
    try {
      env = json::parse(text);
    } catch (const json::exception& e) {
      throw DomainError(std::string("replay: malformed JSON: ") + e.what());
    }
    if (!env.contains("command") || !env.contains("config")) throw DomainError("replay: missing command or config");
    return {env.at("command").get<std::string>(), env.at("config")};
  }
  std::string command;
  json config;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("# command: ", 0) == 0) command = line.substr(11);
    if (line.rfind("# config: ", 0) == 0) {
      try {
        config = json::parse(line.substr(10));
      } catch (const json::exception& e) {
        throw DomainError(std::string("replay: malformed config line: ") + e.what());
      }
    }
  }
  if (command.empty() || config.is_null()) throw DomainError("replay: no embedded command/config in " + path);
  return {command, config};
}

// Flag list that reproduces a resolved config.
inline std::vector<std::string> config_to_args(const std::string& command, const json& config) {
  std::vector<std::string> args{command};
  for (const auto& [key, value] : config.items()) {
    if (value.is_null()) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + key);
      continue;
    }
    args.push_back("--" + key);
    if (value.is_array()) {
      for (const auto& v : value) args.push_back(v.dump());
    } else if (value.is_string()) {
      args.push_back(value.get<std::string>());
    } else {
      args.push_back(value.dump());
    }
  }
  return args;
}

inline std::filesystem::path resolve_output(const std::string& out, const std::string& command,
                                            const std::string& format) {
  const char* dir = std::getenv(output_dir_env);
  std::filesystem::path p = out.empty() ? std::filesystem::path(command + "." + format) : std::filesystem::path(out);
  if (dir && *dir && p.is_relative()) p = std::filesystem::path(dir) / p;
  return p;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  Flags f;
  std::string out_path, format = "json", replay;
  bool append = false;

  CLI::App app{"Narrow escape solvers and Monte Carlo validation", "necli"};
  app.set_version_flag("--version", version);
  app.require_subcommand(0, 1);
  app.fallthrough();
  app.add_option("--out", out_path, "Output file (relative paths resolve against $NARROW_ESCAPE_OUTPUT_DIR)");
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  app.add_flag("--append", append, "Append CSV rows to an existing file");
  app.add_option("--replay", replay, "Re-run the configuration embedded in an output file");

  std::map<std::string, std::function<Table(const Flags&, const detail::Given&)>> handlers;
  auto sub = [&](const std::string& name, const std::string& desc, auto handler) {
    handlers[name] = handler;
    return app.add_subcommand(name, desc);
  };

  CLI::App* asym = sub("asym", "Leading-order and two-term asymptotic MFPT formulas", cmd_asym);
  asym->add_option("--shape", f.shape, "Formula")
      ->check(CLI::IsMember({"circle", "ellipse", "squeezed", "squeezed-area", "sphere", "channel", "arrival"}))
      ->capture_default_str();
  asym->add_option("--V", f.V, "Domain volume");
  asym->add_option("--D", f.D, "Diffusion coefficient")->capture_default_str();
  asym->add_option("--a", f.a, "Window (large) semi-axis or radius");
  asym->add_option("--b", f.b, "Small semi-axis");
  asym->add_option("--e", f.e, "Eccentricity");
  asym->add_option("--S", f.S, "Window area");
  asym->add_option("--R", f.R, "Sphere radius")->capture_default_str();
  asym->add_option("--L", f.L, "Channel length");
  asym->add_option("--C-molar", f.C_molar, "Concentration in mol/L (arrival)");

  CLI::App* sphere = sub("sphere", "Two-term ball formula over a range of a/R", cmd_sphere);
  sphere->add_option("--R", f.R, "Ball radius")->capture_default_str();
  sphere->add_option("--D", f.D, "Diffusion coefficient")->capture_default_str();
  sphere->add_option("--ratios", f.ratios, "Values of a/R")->capture_default_str();

  CLI::App* collins = sub("collins", "Integral-equation solution for b0 on the ball", cmd_collins);
  collins->add_option("--R", f.R, "Ball radius")->capture_default_str();
  collins->add_option("--eps", f.eps, "Cap half-angle")->capture_default_str();
  collins->add_option("--nquad", f.nquad, "Quadrature nodes")->capture_default_str();
  collins->add_option("--nseries", f.nseries, "Series terms for the kernel")->capture_default_str();
  collins->add_flag("--zero-kernel", f.zero_kernel, "Drop the kernel (leading order)");

  CLI::App* spectral = sub("spectral", "Legendre-series solution on the ball", cmd_spectral);
  spectral->add_option("--R", f.R, "Ball radius")->capture_default_str();
  spectral->add_option("--eps", f.eps, "Cap half-angle")->capture_default_str();
  spectral->add_option("--N", f.N, "Highest Legendre degree")->capture_default_str();
  spectral->add_option("--M", f.M, "Collocation angles (default 4N)");

  CLI::App* window = sub("window", "Flux integral equation on a planar window", cmd_window);
  window->add_option("--a", f.a, "Large semi-axis")->capture_default_str();
  window->add_option("--b", f.b, "Small semi-axis (default a)");
  window->add_option("--e", f.e, "Eccentricity");
  window->add_option("--V", f.V, "Domain volume")->capture_default_str();
  window->add_option("--D", f.D, "Diffusion coefficient")->capture_default_str();
  window->add_option("--n", f.n, "Radial mesh resolution")->capture_default_str();
  window->add_option("--check", f.check, "Points for the constant-potential check")->capture_default_str();
  window->add_option("--check-resolution", f.check_resolution, "Cells per radius for that check")
      ->capture_default_str();
  window->add_option("--mesh", f.mesh, "Import a mesh (lines: x y area)");
  window->add_option("--export-mesh", f.export_mesh, "Write the mesh used");
  f.a = 1.0;

  auto sim_flags = [&](CLI::App* s) {
    s->add_option("--geometry", f.geometry, "Domain")
        ->check(CLI::IsMember({"ball", "cylinder", "box"}))
        ->capture_default_str();
    s->add_option("--R", f.R, "Ball radius");
    s->add_option("--eps", f.eps, "Cap half-angle");
    s->add_option("--L", f.L, "Cylinder length");
    s->add_option("--radius", f.radius, "Cylinder radius");
    s->add_option("--Lx", f.Lx, "Box edge");
    s->add_option("--Ly", f.Ly, "Box edge");
    s->add_option("--Lz", f.Lz, "Box height");
    s->add_option("--a", f.a, "Window semi-axis (box)");
    s->add_option("--b", f.b, "Window small semi-axis (box)");
    s->add_option("--e", f.e, "Window eccentricity (box)");
    s->add_option("--D", f.D, "Diffusion coefficient")->capture_default_str();
    s->add_option("--dt", f.dt, "Time step (default: geometry-resolving)");
    s->add_option("--paths", f.paths, "Number of paths")->capture_default_str();
    s->add_option("--seed", f.seed, "Random seed")->capture_default_str();
    s->add_option("--max-steps", f.max_steps, "Step cap per path")->capture_default_str();
    s->add_option("--start", f.start, "Start rule")
        ->check(CLI::IsMember({"uniform", "fixed"}))
        ->capture_default_str();
    s->add_option("--x0", f.x0, "Fixed start point")->expected(3);
    s->add_option("--workers", f.workers, "Threads (0: all cores)")->capture_default_str();
    s->add_flag("--no-bridge", f.no_bridge, "Disable the Brownian-bridge absorption test");
  };
  CLI::App* simulate_app = sub("simulate", "Monte Carlo MFPT", cmd_simulate);
  sim_flags(simulate_app);
  CLI::App* compare_app = sub("compare", "Monte Carlo against every applicable solver", cmd_compare);
  sim_flags(compare_app);
  compare_app->add_option("--nquad", f.nquad, "Quadrature nodes for collins (ball)");
  compare_app->add_option("--N", f.N, "Legendre degree for spectral (ball)");
  compare_app->add_option("--window-n", f.window_n, "Mesh resolution for the window solver (box)");

  CLI::App* norms = sub("norms", "Operator norm of the kernel against its bound", cmd_norms);
  norms->add_option("--eps-list", f.eps_list, "Cap half-angles")->capture_default_str();
  norms->add_option("--nquad", f.nquad, "Quadrature nodes")->capture_default_str();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << detail::one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (!replay.empty()) {
      if (!app.get_subcommands().empty()) throw DomainError("--replay cannot be combined with a command");
      auto [command, config] = read_replay(replay);
      if (!handlers.count(command)) throw DomainError("replay: unknown command " + command);
      std::vector<std::string> again;
      if (!out_path.empty()) again.insert(again.end(), {"--out", out_path});
      again.insert(again.end(), {"--format", format});
      if (append) again.push_back("--append");
      const auto rest = config_to_args(command, config);
      again.insert(again.end(), rest.begin(), rest.end());
      return run(again, out, err);
    }
    if (app.get_subcommands().empty()) throw DomainError("no command given (see --help)");
    if (append && format != "csv") throw DomainError("--append requires --format csv");

    CLI::App* chosen = app.get_subcommands().front();
    const std::string command = chosen->get_name();
    const Table table = handlers.at(command)(f, detail::Given(chosen));
    for (const auto& w : table.warnings) err << "warning: " << detail::one_line(w) << '\n';

    const bool to_stdout = out_path.empty() && !std::getenv(output_dir_env);
    if (to_stdout) {
      if (format == "json") {
        write_json(out, command, table);
      } else {
        write_csv(out, command, table, true);
      }
      return 0;
    }
    const std::filesystem::path path = resolve_output(out_path, command, format);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const bool existing = append && std::filesystem::exists(path) && std::filesystem::file_size(path) > 0;
    if (existing) {
      // Appending is only allowed onto the same column schema.
      std::ifstream in(path);
      std::string line, header;
      while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '#') {
          header = line;
          break;
        }
      }
      std::ostringstream expected;
      write_csv_header(expected, table.columns);
      if (header + '\n' != expected.str()) throw DomainError("--append: " + path.string() + " has different columns");
    }
    std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
    if (!os) throw DomainError("cannot write " + path.string());
    if (format == "json") {
      write_json(os, command, table);
    } else {
      write_csv(os, command, table, !existing);
    }
    return 0;
  } catch (const SolverError& e) {
    err << "error: solver: " << detail::one_line(e.what()) << '\n';
    return 3;
  } catch (const std::domain_error& e) {
    err << "error: domain: " << detail::one_line(e.what()) << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: domain: " << detail::one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: internal: " << detail::one_line(e.what()) << '\n';
    return 1;
  }
}

}  // namespace narrow_escape::cli
