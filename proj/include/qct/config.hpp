#pragma once

// JSON run configuration. Every object is checked against its allowed key
// set, so a misspelt key is an error rather than a silently ignored default.

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "qct/common.hpp"
#include "qct/compare.hpp"
#include "qct/grid.hpp"
#include "qct/model.hpp"

namespace qct {

using Json = nlohmann::json;

struct SolverSpec {
  std::size_t steps_per_period = default_steps_per_period;
  double periods = 30.0;
  double sampling_phase = 0.0;  // final time = (periods + phase) T
  std::size_t diagnostics_every = 0;
  std::vector<double> snapshot_periods;
  double boundary_cap = 1e-6;
};

struct EnsembleSpec {
  std::size_t n = 100000;
  double bandwidth_cells = 1.0;
  std::size_t steps_per_period = default_steps_per_period;
};

struct LyapunovSpec {
  double t_transient = 50.0;
  double t_average = 500.0;
  std::size_t n_samples = 16;
  double q_center = 0.0, p_center = 0.0, q_half = 1.0, p_half = 1.0;
};

struct ManifoldSpec {
  double guess_q = 0.2, guess_p = 0.0;  // the drive shifts the saddle off the origin
  double newton_tol = 1e-10;
  std::size_t n_periods = 4;
  double max_spacing = 0.05;
  double arc_budget = 1e4;
  double epsilon = 1e-4;
  bool stable = true;
  double exclude_radius = 0.05;
};

struct StrongFormSpec {
  double q = 1.0;
  double t = 0.0;
  double k = 10.0;
  double eta = 1.0;
  double s = 1.0;
};

struct GeometrySpec {
  double lambda_bar = 0.57;
  double prefactor = 1.4e3;
  /// When set, the prefactor is fitted so that t*(calibrate_D) = calibrate_t.
  std::optional<double> calibrate_D, calibrate_t;
  double R = 10.0;
  double t_max = 1e3;
  std::vector<double> D_list{1e-5, 1e-3, 1e-2};
  LyapunovSpec lyapunov;
  ManifoldSpec manifold;
  StrongFormSpec strong_form;
};

struct HyperbolicSpec {
  std::string lambda_source = "undriven";  // undriven: sqrt(2A/m); driven: stroboscopic saddle
  std::vector<double> t_list{0.5};
  std::size_t n = 100000;
  double dt = 1e-4;
  std::size_t n_bootstrap = 200;
  double linear_fraction = 0.05;
};

struct SemiclassicalSpec {
  double p0 = 0.0;
  double q_lo = -2.0, q_hi = 2.0;
  std::size_t n_samples = 256;
  double periods = 2.0;
  double max_gap = 0.02;
  double X_max = 4.0;
  std::size_t n_X = 1024;
  PhaseSpaceGrid grid = {-5.0, 5.0, -15.0, 15.0, 64, 64};
};

struct CompareSpec {
  std::string a, b;  // field dump paths
  double p_slice = 0.0;
  RegimeThresholds thresholds;
};

struct RunConfig {
  std::string preset;
  std::string experiment;
  SystemParams system;
  PhaseSpaceGrid grid = default_grid();
  CoherentState initial{1.0, 0.0, 0.0};
  SolverSpec solver;
  std::optional<std::uint64_t> seed;
  EnsembleSpec ensemble;
  GeometrySpec geometry;
  HyperbolicSpec hyperbolic;
  SemiclassicalSpec semiclassical;
  CompareSpec compare;
  std::string output_dir = "qct_out";
  Json echo;  // the document as read, for the manifest
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> v{"evolve-quantum", "evolve-classical", "ensemble",        "manifold",
                                          "lyapunov",       "tstar",            "threshold",       "strong-form",
                                          "local-cumulants", "semiclassical",   "compare",         "sweep"};
  return v;
}

inline bool is_stochastic(const std::string& experiment) {
  return experiment == "ensemble" || experiment == "local-cumulants" || experiment == "lyapunov";
}

namespace detail {

inline void check_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(ErrorKind::ValidationError, where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) fail(ErrorKind::UnknownKey, (where.empty() ? "" : where + ".") + it.key());
  }
}

template <class T>
void read(const Json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::ValidationError, (where.empty() ? "" : where + ".") + key);
  }
}

inline std::string position_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

inline SystemParams preset_system(const std::string& name) {
  if (name == "duffing-paper") return SystemParams::duffing_paper();
  fail(ErrorKind::ValidationError, "preset: unknown preset '" + name + "'");
}

/// Builds and validates a RunConfig from a parsed document.
inline RunConfig config_from_json(const Json& doc) {
  using detail::check_keys;
  using detail::read;
  RunConfig c;
  c.echo = doc;
  check_keys(doc, "", {"preset", "experiment", "system", "grid", "initial_state", "solver", "seed", "ensemble",
                       "geometry", "hyperbolic", "semiclassical", "compare", "output"});
  read(doc, "preset", c.preset, "");
  if (!c.preset.empty()) c.system = preset_system(c.preset);
  read(doc, "experiment", c.experiment, "");
  if (!c.experiment.empty() && std::find(subcommands().begin(), subcommands().end(), c.experiment) == subcommands().end())
    fail(ErrorKind::ValidationError, "experiment");
  if (doc.contains("seed")) {
    const auto& s = doc.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      fail(ErrorKind::ValidationError, "seed");
    c.seed = s.get<std::uint64_t>();
  }

  if (doc.contains("system")) {
    const auto& s = doc.at("system");
    check_keys(s, "system", {"m", "A", "B", "Lambda", "omega", "hbar", "D"});
    read(s, "m", c.system.m, "system");
    read(s, "A", c.system.A, "system");
    read(s, "B", c.system.B, "system");
    read(s, "Lambda", c.system.Lambda, "system");
    read(s, "omega", c.system.omega, "system");
    read(s, "hbar", c.system.hbar, "system");
    read(s, "D", c.system.D, "system");
  }
  try {
    c.system.validate();
  } catch (const Error& e) {
    fail(ErrorKind::ValidationError, std::string("system: ") + e.what());
  }

  if (doc.contains("grid")) {
    const auto& g = doc.at("grid");
    check_keys(g, "grid", {"q_min", "q_max", "p_min", "p_max", "n_q", "n_p"});
    read(g, "q_min", c.grid.q_min, "grid");
    read(g, "q_max", c.grid.q_max, "grid");
    read(g, "p_min", c.grid.p_min, "grid");
    read(g, "p_max", c.grid.p_max, "grid");
    read(g, "n_q", c.grid.n_q, "grid");
    read(g, "n_p", c.grid.n_p, "grid");
  }
  try {
    c.grid = init_grid(c.grid.q_min, c.grid.q_max, c.grid.p_min, c.grid.p_max, c.grid.n_q, c.grid.n_p);
  } catch (const Error& e) {
    fail(ErrorKind::ValidationError, std::string("grid: ") + e.what());
  }

  if (doc.contains("initial_state")) {
    const auto& s = doc.at("initial_state");
    check_keys(s, "initial_state", {"q0", "p0", "sigma_q"});
    read(s, "q0", c.initial.q0, "initial_state");
    read(s, "p0", c.initial.p0, "initial_state");
    read(s, "sigma_q", c.initial.sigma_q, "initial_state");
    if (c.initial.sigma_q < 0) fail(ErrorKind::ValidationError, "initial_state.sigma_q");
  }

  if (doc.contains("solver")) {
    const auto& s = doc.at("solver");
    check_keys(s, "solver", {"steps_per_period", "periods", "sampling_phase", "diagnostics_every", "snapshot_periods",
                             "boundary_cap"});
    read(s, "steps_per_period", c.solver.steps_per_period, "solver");
    read(s, "periods", c.solver.periods, "solver");
    read(s, "sampling_phase", c.solver.sampling_phase, "solver");
    read(s, "diagnostics_every", c.solver.diagnostics_every, "solver");
    read(s, "snapshot_periods", c.solver.snapshot_periods, "solver");
    read(s, "boundary_cap", c.solver.boundary_cap, "solver");
  }
  if (c.solver.steps_per_period < 100) fail(ErrorKind::ValidationError, "solver.steps_per_period");
  if (!(c.solver.periods >= 0)) fail(ErrorKind::ValidationError, "solver.periods");
  if (!(c.solver.sampling_phase >= 0 && c.solver.sampling_phase < 1)) fail(ErrorKind::ValidationError, "solver.sampling_phase");
  if (!(c.solver.boundary_cap > 0)) fail(ErrorKind::ValidationError, "solver.boundary_cap");
  for (double k : c.solver.snapshot_periods) {
    // Snapshot times must fall on the dt lattice: whole multiples of T / steps_per_period.
    const double steps = k * static_cast<double>(c.solver.steps_per_period);
    if (k < 0 || k > c.solver.periods + c.solver.sampling_phase || std::abs(steps - std::round(steps)) > 1e-6)
      fail(ErrorKind::ValidationError, "solver.snapshot_periods");
  }
  {
    const double steps = (c.solver.periods + c.solver.sampling_phase) * static_cast<double>(c.solver.steps_per_period);
    if (std::abs(steps - std::round(steps)) > 1e-6) fail(ErrorKind::ValidationError, "solver.periods");
  }

  if (doc.contains("ensemble")) {
    const auto& s = doc.at("ensemble");
    check_keys(s, "ensemble", {"n", "bandwidth_cells", "steps_per_period"});
    read(s, "n", c.ensemble.n, "ensemble");
    read(s, "bandwidth_cells", c.ensemble.bandwidth_cells, "ensemble");
    read(s, "steps_per_period", c.ensemble.steps_per_period, "ensemble");
  }
  if (c.ensemble.n < 1) fail(ErrorKind::ValidationError, "ensemble.n");
  if (!(c.ensemble.bandwidth_cells >= 0)) fail(ErrorKind::ValidationError, "ensemble.bandwidth_cells");
  if (c.ensemble.steps_per_period < 1) fail(ErrorKind::ValidationError, "ensemble.steps_per_period");

  if (doc.contains("geometry")) {
    const auto& s = doc.at("geometry");
    check_keys(s, "geometry", {"lambda_bar", "prefactor", "calibrate", "R", "t_max", "D_list", "lyapunov", "manifold",
                               "strong_form"});
    read(s, "lambda_bar", c.geometry.lambda_bar, "geometry");
    read(s, "prefactor", c.geometry.prefactor, "geometry");
    read(s, "R", c.geometry.R, "geometry");
    read(s, "t_max", c.geometry.t_max, "geometry");
    read(s, "D_list", c.geometry.D_list, "geometry");
    if (s.contains("calibrate")) {
      const auto& k = s.at("calibrate");
      check_keys(k, "geometry.calibrate", {"D", "t_star"});
      if (!k.contains("D") || !k.contains("t_star")) fail(ErrorKind::ValidationError, "geometry.calibrate");
      double d = 0, t = 0;
      read(k, "D", d, "geometry.calibrate");
      read(k, "t_star", t, "geometry.calibrate");
      if (!(d > 0 && t > 0)) fail(ErrorKind::ValidationError, "geometry.calibrate");
      c.geometry.calibrate_D = d;
      c.geometry.calibrate_t = t;
    }
    if (s.contains("lyapunov")) {
      const auto& k = s.at("lyapunov");
      auto& l = c.geometry.lyapunov;
      check_keys(k, "geometry.lyapunov", {"t_transient", "t_average", "n_samples", "q_center", "p_center", "q_half", "p_half"});
      read(k, "t_transient", l.t_transient, "geometry.lyapunov");
      read(k, "t_average", l.t_average, "geometry.lyapunov");
      read(k, "n_samples", l.n_samples, "geometry.lyapunov");
      read(k, "q_center", l.q_center, "geometry.lyapunov");
      read(k, "p_center", l.p_center, "geometry.lyapunov");
      read(k, "q_half", l.q_half, "geometry.lyapunov");
      read(k, "p_half", l.p_half, "geometry.lyapunov");
      if (l.n_samples < 2 || !(l.t_average >= 1) || !(l.t_transient >= 0))
        fail(ErrorKind::ValidationError, "geometry.lyapunov");
    }
    if (s.contains("manifold")) {
      const auto& k = s.at("manifold");
      auto& m = c.geometry.manifold;
      check_keys(k, "geometry.manifold", {"guess_q", "guess_p", "newton_tol", "n_periods", "max_spacing", "arc_budget",
                                          "epsilon", "stable", "exclude_radius"});
      read(k, "guess_q", m.guess_q, "geometry.manifold");
      read(k, "guess_p", m.guess_p, "geometry.manifold");
      read(k, "newton_tol", m.newton_tol, "geometry.manifold");
      read(k, "n_periods", m.n_periods, "geometry.manifold");
      read(k, "max_spacing", m.max_spacing, "geometry.manifold");
      read(k, "arc_budget", m.arc_budget, "geometry.manifold");
      read(k, "epsilon", m.epsilon, "geometry.manifold");
      read(k, "stable", m.stable, "geometry.manifold");
      read(k, "exclude_radius", m.exclude_radius, "geometry.manifold");
      if (m.n_periods < 1 || !(m.max_spacing > 0) || !(m.epsilon > 0) || !(m.newton_tol > 0))
        fail(ErrorKind::ValidationError, "geometry.manifold");
    }
    if (s.contains("strong_form")) {
      const auto& k = s.at("strong_form");
      auto& f = c.geometry.strong_form;
      check_keys(k, "geometry.strong_form", {"q", "t", "k", "eta", "s"});
      read(k, "q", f.q, "geometry.strong_form");
      read(k, "t", f.t, "geometry.strong_form");
      read(k, "k", f.k, "geometry.strong_form");
      read(k, "eta", f.eta, "geometry.strong_form");
      read(k, "s", f.s, "geometry.strong_form");
      if (!(f.k > 0 && f.s > 0 && f.eta > 0 && f.eta <= 1)) fail(ErrorKind::ValidationError, "geometry.strong_form");
    }
  }
  if (!(c.geometry.lambda_bar > 0)) fail(ErrorKind::ValidationError, "geometry.lambda_bar");
  if (!(c.geometry.prefactor > 0)) fail(ErrorKind::ValidationError, "geometry.prefactor");
  if (!(c.geometry.R > 0)) fail(ErrorKind::ValidationError, "geometry.R");
  if (!(c.geometry.t_max > 0)) fail(ErrorKind::ValidationError, "geometry.t_max");
  for (double d : c.geometry.D_list)
    if (!(d > 0)) fail(ErrorKind::ValidationError, "geometry.D_list");

  if (doc.contains("hyperbolic")) {
    const auto& s = doc.at("hyperbolic");
    check_keys(s, "hyperbolic", {"lambda_source", "t_list", "n", "dt", "n_bootstrap", "linear_fraction"});
    read(s, "lambda_source", c.hyperbolic.lambda_source, "hyperbolic");
    read(s, "t_list", c.hyperbolic.t_list, "hyperbolic");
    read(s, "n", c.hyperbolic.n, "hyperbolic");
    read(s, "dt", c.hyperbolic.dt, "hyperbolic");
    read(s, "n_bootstrap", c.hyperbolic.n_bootstrap, "hyperbolic");
    read(s, "linear_fraction", c.hyperbolic.linear_fraction, "hyperbolic");
  }
  if (c.hyperbolic.lambda_source != "undriven" && c.hyperbolic.lambda_source != "driven")
    fail(ErrorKind::ValidationError, "hyperbolic.lambda_source");
  if (c.hyperbolic.n < 2 || !(c.hyperbolic.dt > 0) || !(c.hyperbolic.linear_fraction > 0))
    fail(ErrorKind::ValidationError, "hyperbolic");
  for (double t : c.hyperbolic.t_list)
    if (!(t >= 0)) fail(ErrorKind::ValidationError, "hyperbolic.t_list");

  if (doc.contains("semiclassical")) {
    const auto& s = doc.at("semiclassical");
    auto& sc = c.semiclassical;
    check_keys(s, "semiclassical", {"p0", "q_lo", "q_hi", "n_samples", "periods", "max_gap", "X_max", "n_X", "grid"});
    read(s, "p0", sc.p0, "semiclassical");
    read(s, "q_lo", sc.q_lo, "semiclassical");
    read(s, "q_hi", sc.q_hi, "semiclassical");
    read(s, "n_samples", sc.n_samples, "semiclassical");
    read(s, "periods", sc.periods, "semiclassical");
    read(s, "max_gap", sc.max_gap, "semiclassical");
    read(s, "X_max", sc.X_max, "semiclassical");
    read(s, "n_X", sc.n_X, "semiclassical");
    if (s.contains("grid")) {
      const auto& g = s.at("grid");
      check_keys(g, "semiclassical.grid", {"q_min", "q_max", "p_min", "p_max", "n_q", "n_p"});
      read(g, "q_min", sc.grid.q_min, "semiclassical.grid");
      read(g, "q_max", sc.grid.q_max, "semiclassical.grid");
      read(g, "p_min", sc.grid.p_min, "semiclassical.grid");
      read(g, "p_max", sc.grid.p_max, "semiclassical.grid");
      read(g, "n_q", sc.grid.n_q, "semiclassical.grid");
      read(g, "n_p", sc.grid.n_p, "semiclassical.grid");
    }
    try {
      sc.grid = init_grid(sc.grid.q_min, sc.grid.q_max, sc.grid.p_min, sc.grid.p_max, sc.grid.n_q, sc.grid.n_p);
    } catch (const Error& e) {
      fail(ErrorKind::ValidationError, std::string("semiclassical.grid: ") + e.what());
    }
    if (!(sc.q_hi > sc.q_lo) || sc.n_samples < 64 || !(sc.periods >= 0) || !(sc.max_gap > 0) || !(sc.X_max > 0) ||
        sc.n_X < 512)
      fail(ErrorKind::ValidationError, "semiclassical");
  }

  if (doc.contains("compare")) {
    const auto& s = doc.at("compare");
    check_keys(s, "compare", {"a", "b", "p_slice", "neg_hi", "l1_lo"});
    read(s, "a", c.compare.a, "compare");
    read(s, "b", c.compare.b, "compare");
    read(s, "p_slice", c.compare.p_slice, "compare");
    read(s, "neg_hi", c.compare.thresholds.neg_hi, "compare");
    read(s, "l1_lo", c.compare.thresholds.l1_lo, "compare");
  }

  if (doc.contains("output")) {
    const auto& s = doc.at("output");
    check_keys(s, "output", {"dir"});
    read(s, "dir", c.output_dir, "output");
  }
  return c;
}

/// Checks that the specs a given experiment needs are present.
inline void validate_for(const RunConfig& c, const std::string& experiment) {
  if (is_stochastic(experiment) && !c.seed) fail(ErrorKind::ValidationError, "seed");
  if (experiment == "compare" && (c.compare.a.empty() || c.compare.b.empty()))
    fail(ErrorKind::ValidationError, "compare.a/compare.b");
}

/// `seed_override` (the command-line seed) takes part in validation, so a
/// stochastic config without its own seed is accepted when one is supplied.
inline RunConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override = {}) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::ParseError, detail::position_of(text, e.byte) + ": " + e.what());
  }
  RunConfig c = config_from_json(doc);
  if (seed_override) c.seed = seed_override;
  if (!c.experiment.empty()) validate_for(c, c.experiment);
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {}) {
  std::string text;
  try {
    text = detail::read_all(path);
  } catch (const Error& e) {
    fail(ErrorKind::IoError, e.what());
  }
  return parse_config(text, seed_override);
}

}  // namespace qct
