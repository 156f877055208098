#pragma once

// Subcommand dispatch: runs one experiment from a RunConfig, writes its
// artifacts and a manifest into the output directory.

#include <fftw3.h>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qct/classical.hpp"
#include "qct/common.hpp"
#include "qct/compare.hpp"
#include "qct/config.hpp"
#include "qct/geometry.hpp"
#include "qct/grid.hpp"
#include "qct/hyperbolic.hpp"
#include "qct/model.hpp"
#include "qct/quantum.hpp"
#include "qct/semiclassical.hpp"

namespace qct {

inline constexpr const char* version_string = "1.0.0";

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline Json to_json(const SystemParams& s) {
  return {{"m", s.m}, {"A", s.A}, {"B", s.B}, {"Lambda", s.Lambda}, {"omega", s.omega}, {"hbar", s.hbar}, {"D", s.D}};
}

inline Json to_json(const PhaseSpaceGrid& g) {
  return {{"q_min", g.q_min}, {"q_max", g.q_max}, {"p_min", g.p_min},
          {"p_max", g.p_max}, {"n_q", g.n_q},     {"n_p", g.n_p}};
}

inline Json to_json(const Diagnostics& d) {
  return {{"t", d.t},
          {"norm", d.norm},
          {"mean_q", d.mean_q},
          {"mean_p", d.mean_p},
          {"var_q", d.var_q},
          {"var_p", d.var_p},
          {"cov_qp", d.cov_qp},
          {"negativity_volume", d.negativity_volume},
          {"min_value", d.min_value},
          {"max_value", d.max_value},
          {"boundary_mass", d.boundary_mass},
          {"purity", d.purity}};
}

inline Json to_json(const ThresholdReport& r) {
  return {{"D", r.D},       {"m", r.m},           {"lambda_bar", r.lambda_bar}, {"hbar", r.hbar},
          {"prefactor", r.prefactor}, {"t_star", r.t_star}, {"lhs", r.lhs}, {"rhs", r.rhs},
          {"satisfied", r.satisfied}, {"margin", r.margin}, {"S", r.S},     {"S_over_hbar", r.S_over_hbar}};
}

inline Json to_json(const CumulantSet& c) {
  return {{"t", c.t},
          {"mean_plus", c.mean_plus},
          {"mean_minus", c.mean_minus},
          {"var_plus", c.var_plus},
          {"var_minus", c.var_minus},
          {"cross", c.cross}};
}

inline std::string diagnostics_csv(const std::vector<Diagnostics>& series) {
  std::string out = "t,norm,mean_q,mean_p,var_q,var_p,cov_qp,negativity_volume,min_value,max_value,boundary_mass\n";
  for (const auto& d : series) {
    for (double v : {d.t, d.norm, d.mean_q, d.mean_p, d.var_q, d.var_p, d.cov_qp, d.negativity_volume, d.min_value,
                     d.max_value})
      out += format_double(v) + ",";
    out += format_double(d.boundary_mass) + "\n";
  }
  return out;
}

/// Collects the files a run writes, in order.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<std::string>& names() const { return names_; }

  void text(const std::string& name, const std::string& data) { put(name, data, false); }
  void json(const std::string& name, const Json& j) { put(name, j.dump(2) + "\n", false); }
  void field(const std::string& name, const PhaseSpaceField& f) { put(name, encode_field(f), true); }

 private:
  void put(const std::string& name, const std::string& data, bool binary) {
    detail::write_all(dir_ / name, data, binary);
    names_.push_back(name);
  }

  std::filesystem::path dir_;
  std::vector<std::string> names_;
};

struct RunRequest {
  std::string subcommand;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;  // overrides the config seed
};

struct RunOutcome {
  int exit_code = 0;
  std::vector<std::string> artifacts;
  std::optional<Json> error;
};

namespace detail {

inline double run_time(const RunConfig& c) {
  return (c.solver.periods + c.solver.sampling_phase) * c.system.period();
}

inline double run_dt(const RunConfig& c) { return c.system.period() / static_cast<double>(c.solver.steps_per_period); }

inline EvolveSchedule schedule_of(const RunConfig& c) {
  EvolveSchedule s;
  s.diagnostics_every = c.solver.diagnostics_every;
  s.boundary_cap = c.solver.boundary_cap;
  for (double k : c.solver.snapshot_periods) s.snapshot_times.push_back(k * c.system.period());
  return s;
}

inline std::string d_tag(double D) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0e", D);
  return buf;
}

inline EvolveResult evolve_field(const RunConfig& c, const SystemParams& s, KernelKind kind) {
  const double dt = c.system.period() / static_cast<double>(c.solver.steps_per_period);
  if (kind == KernelKind::Moyal) {
    auto f = init_coherent_state(c.grid, c.initial, s.hbar, FieldKind::Wigner);
    return evolve_wigner(std::move(f), run_time(c), dt, s, schedule_of(c));
  }
  auto f = init_coherent_state(c.grid, c.initial, s.hbar, FieldKind::Classical);
  return evolve_fokker_planck(std::move(f), run_time(c), dt, s, schedule_of(c));
}

inline void emit_evolution(ArtifactWriter& w, const RunConfig& c, const EvolveResult& r, const std::string& stem) {
  w.field(stem + ".bin", r.final);
  w.text(stem + "_diagnostics.csv", diagnostics_csv(r.series));
  for (std::size_t k = 0; k < r.snapshots.size(); ++k)
    w.field(stem + "_snapshot_" + std::to_string(k) + ".bin", r.snapshots[k]);
  w.text(stem + "_slice.csv", slice_csv(slice_at_p(r.final, c.compare.p_slice)));
}

inline void cmd_evolve(ArtifactWriter& w, const RunConfig& c, KernelKind kind) {
  const auto r = evolve_field(c, c.system, kind);
  const std::string stem = kind == KernelKind::Moyal ? "wigner" : "classical";
  emit_evolution(w, c, r, stem);
  w.json(stem + ".json", {{"t", r.final.t}, {"final", to_json(r.series.back())}, {"system", to_json(c.system)},
                          {"grid", to_json(c.grid)}});
}

inline void cmd_ensemble(ArtifactWriter& w, const RunConfig& c, std::uint64_t seed) {
  auto e = sample_coherent_ensemble(c.initial, c.system.hbar, c.ensemble.n, seed);
  const double dt = c.system.period() / static_cast<double>(c.ensemble.steps_per_period);
  e = evolve_ensemble(std::move(e), run_time(c), dt, c.system);
  w.text("ensemble.csv", ensemble_csv(e));
  w.json("ensemble.json", {{"seed", seed}, {"n", e.size()}, {"t", e.t}, {"params", to_json(c.system)}});
  const Bandwidth bw{c.ensemble.bandwidth_cells * c.grid.dq(), c.ensemble.bandwidth_cells * c.grid.dp()};
  const auto f = density_from_ensemble(e, c.grid, bw);
  w.field("ensemble_density.bin", f);
  w.json("ensemble_density.json", to_json(diagnostics(f)));
}

inline FixedPoint saddle_of(const RunConfig& c) {
  const auto& m = c.geometry.manifold;
  SaddleOptions so;
  so.steps_per_period = c.solver.steps_per_period;
  return find_saddle(c.system, {m.guess_q, m.guess_p, 0.0}, m.newton_tol, so);
}

inline Json fixed_point_json(const FixedPoint& fp) {
  return {{"q", fp.location.q},
          {"p", fp.location.p},
          {"lambda", fp.lambda},
          {"mu_unstable", fp.mu_unstable},
          {"mu_stable", fp.mu_stable},
          {"unstable_dir", {fp.unstable_dir[0], fp.unstable_dir[1]}},
          {"stable_dir", {fp.stable_dir[0], fp.stable_dir[1]}},
          {"residual", fp.residual},
          {"iterations", fp.iterations}};
}

inline void cmd_manifold(ArtifactWriter& w, const RunConfig& c) {
  const auto fp = saddle_of(c);
  const auto& m = c.geometry.manifold;
  ManifoldOptions mo;
  mo.n_periods = m.n_periods;
  mo.max_spacing = m.max_spacing;
  mo.arc_budget = m.arc_budget;
  mo.epsilon = m.epsilon;
  mo.steps_per_period = c.solver.steps_per_period;
  const auto un = trace_unstable_manifold(fp, c.system, mo);
  w.text("manifold_unstable.csv", manifold_csv(un.polylines));
  Json lengths = Json::array();
  for (const auto& pl : un.polylines) lengths.push_back(pl.length());
  Json report{{"fixed_point", fixed_point_json(fp)},
              {"unstable_lengths", lengths},
              {"budget_exceeded", un.budget_exceeded}};
  if (m.stable) {
    const auto st = trace_stable_manifold(fp, c.system, mo);
    w.text("manifold_stable.csv", manifold_csv(st.polylines));
    const RescaledMetric metric(fp.lambda, c.system.m);
    const auto hits = intersections(un.polylines.back(), st.polylines.back(), fp.location, m.exclude_radius, metric);
    Json pts = Json::array();
    for (const auto& z : hits) pts.push_back({z.q, z.p});
    report["intersections"] = pts;
    report["budget_exceeded"] = un.budget_exceeded || st.budget_exceeded;
  }
  w.json("manifold.json", report);
  if (report["budget_exceeded"].get<bool>())
    fail(ErrorKind::ArcBudgetExceeded, "manifold arclength exceeded the budget; polylines written are truncated");
}

inline void cmd_lyapunov(ArtifactWriter& w, const RunConfig& c, std::uint64_t seed) {
  const auto& l = c.geometry.lyapunov;
  LyapunovOptions o;
  o.t_transient = l.t_transient;
  o.t_average = l.t_average;
  o.n_samples = l.n_samples;
  o.seed = seed;
  o.steps_per_period = c.solver.steps_per_period;
  o.q_center = l.q_center;
  o.p_center = l.p_center;
  o.q_half = l.q_half;
  o.p_half = l.p_half;
  const auto r = lyapunov_exponent(c.system, o);
  w.json("lyapunov.json", {{"lambda_bar", r.lambda}, {"standard_error", r.standard_error}, {"samples", r.samples},
                           {"seed", seed}, {"t_average", o.t_average}, {"t_transient", o.t_transient}});
}

inline double prefactor_of(const RunConfig& c) {
  if (c.geometry.calibrate_D)
    return calibrate_prefactor(*c.geometry.calibrate_D, *c.geometry.calibrate_t, c.system.m, c.geometry.lambda_bar);
  return c.geometry.prefactor;
}

inline ThresholdReport threshold_for(const RunConfig& c, double D) {
  const double pre = prefactor_of(c);
  const double ts = solve_tstar(D, c.system.m, c.geometry.lambda_bar, pre, c.geometry.t_max);
  return threshold_report(D, ts, c.system.m, c.geometry.lambda_bar, c.system.hbar, pre);
}

inline void cmd_tstar(ArtifactWriter& w, const RunConfig& c) {
  if (!(c.system.D > 0)) fail(ErrorKind::ValidationError, "system.D (tstar needs D > 0)");
  w.json("threshold.json", to_json(threshold_for(c, c.system.D)));
}

inline void cmd_threshold(ArtifactWriter& w, const RunConfig& c) {
  Json rows = Json::array();
  std::string csv = "D,t_star,lhs,rhs,margin,satisfied\n";
  for (double D : c.geometry.D_list) {
    const auto r = threshold_for(c, D);
    rows.push_back(to_json(r));
    csv += format_double(D) + "," + format_double(r.t_star) + "," + format_double(r.lhs) + "," + format_double(r.rhs) +
           "," + format_double(r.margin) + "," + (r.satisfied ? "true" : "false") + "\n";
  }
  w.json("threshold_table.json", rows);
  w.text("threshold_table.csv", csv);
}

inline void cmd_strong_form(ArtifactWriter& w, const RunConfig& c) {
  const auto& f = c.geometry.strong_form;
  const auto sp = strong_form_params(f.q, f.t, c.system, f.k, f.eta, f.s);
  const auto r = strong_form_check(sp, c.geometry.R);
  auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json("inf"); };
  w.json("strong_form.json", {{"q", f.q},
                              {"t", f.t},
                              {"F", sp.F},
                              {"dF", sp.dF},
                              {"d2F", sp.d2F},
                              {"R", r.R},
                              {"loc_weak", num(r.loc_weak)},
                              {"loc_strong", num(r.loc_strong)},
                              {"lownoise_lower", num(r.lownoise_lower)},
                              {"lownoise_upper", num(r.lownoise_upper)},
                              {"loc_weak_ok", r.loc_weak_ok},
                              {"loc_strong_ok", r.loc_strong_ok},
                              {"lownoise_lower_ok", r.lownoise_lower_ok},
                              {"lownoise_upper_ok", r.lownoise_upper_ok}});
}

inline void cmd_local_cumulants(ArtifactWriter& w, const RunConfig& c, std::uint64_t seed) {
  const auto& h = c.hyperbolic;
  double lambda = 0, q_eq = 0, p_eq = 0;
  if (h.lambda_source == "undriven") {
    if (!(c.system.A > 0)) fail(ErrorKind::ValidationError, "system.A (undriven saddle needs A > 0)");
    lambda = std::sqrt(2.0 * c.system.A / c.system.m);
  } else {
    const auto fp = saddle_of(c);
    lambda = fp.lambda;
    q_eq = fp.location.q;
    p_eq = fp.location.p;
  }
  const auto frame = make_frame(lambda, c.system.m, q_eq, p_eq);
  McCumulantOptions o;
  o.n_bootstrap = h.n_bootstrap;
  o.linear_fraction = h.linear_fraction;
  std::string mc = cumulants_csv_header(), an = cumulants_csv_header();
  Json rows = Json::array();
  for (double t : h.t_list) {
    const auto r = mc_cumulants({q_eq, p_eq, 0.0}, frame, c.system, t, h.n, h.dt, seed, o);
    const auto a = analytic_cumulants(lambda, c.system.m, c.system.D, t);
    mc += cumulants_csv_row(r.value, r.se);
    an += cumulants_csv_row(a, CumulantSet{t});
    rows.push_back({{"t", t}, {"mc", to_json(r.value)}, {"se", to_json(r.se)}, {"analytic", to_json(a)},
                    {"mean_displacement", r.mean_displacement}});
  }
  w.text("cumulants.csv", mc);
  w.text("cumulants_analytic.csv", an);
  w.json("cumulants.json", {{"lambda", lambda}, {"seed", seed}, {"n", h.n}, {"rows", rows}});
}

inline void cmd_semiclassical(ArtifactWriter& w, const RunConfig& c) {
  const auto& sc = c.semiclassical;
  CurveOptions co;
  co.steps_per_period = c.solver.steps_per_period;
  co.max_gap = sc.max_gap;
  const double t = sc.periods * c.system.period();
  const double p0 = sc.p0;
  const auto set = evolve_lagrangian_curve([p0](double) { return p0; }, sc.q_lo, sc.q_hi, sc.n_samples, t, c.system, co);
  w.text("branches.csv", branch_csv(set));
  WignerOptions wo;
  wo.X_max = sc.X_max;
  wo.n_X = sc.n_X;
  bool caustic = false;
  const auto f = semiclassical_field(set, sc.grid, c.system.D, t, c.system.hbar, wo, &caustic);
  w.field("semiclassical.bin", f);
  w.json("semiclassical.json", {{"t", t}, {"samples", set.size()}, {"caustic_on_path", caustic},
                                {"diagnostics", to_json(diagnostics(f))}});
}

inline Json comparison_json(const PhaseSpaceField& a, const PhaseSpaceField& b, const RunConfig& c,
                            SliceComparison* slice_out) {
  const double l1 = l1_distance(a, b);
  const auto da = diagnostics(a), db = diagnostics(b);
  const auto sl = compare_slices(a, b, c.compare.p_slice);
  const auto regime = classify_regime(db.negativity_volume, l1, c.compare.thresholds);
  if (slice_out) *slice_out = sl;
  return {{"l1", l1},
          {"negativity_a", da.negativity_volume},
          {"negativity_b", db.negativity_volume},
          {"p_slice", sl.p_value},
          {"slice_sup", sl.sup_diff},
          {"slice_l1", sl.l1_slice},
          {"slice_correlation", sl.correlation},
          {"regime", to_string(regime)},
          {"t_a", a.t},
          {"t_b", b.t}};
}

inline void cmd_compare(ArtifactWriter& w, const RunConfig& c) {
  const auto a = read_field(c.compare.a);
  const auto b = read_field(c.compare.b);
  SliceComparison sl;
  const auto j = comparison_json(a, b, c, &sl);
  w.text("comparison.csv", comparison_csv(sl));
  w.json("comparison.json", j);
}

inline void cmd_sweep(ArtifactWriter& w, const RunConfig& c) {
  Json rows = Json::array();
  std::string csv = "D,l1,negativity_quantum,negativity_classical,slice_correlation,regime\n";
  for (double D : c.geometry.D_list) {
    SystemParams s = c.system;
    s.D = D;
    const std::string tag = d_tag(D);
    const auto cl = evolve_field(c, s, KernelKind::Classical);
    emit_evolution(w, c, cl, "classical_D" + tag);
    const auto qu = evolve_field(c, s, KernelKind::Moyal);
    emit_evolution(w, c, qu, "wigner_D" + tag);
    SliceComparison sl;
    auto j = comparison_json(cl.final, qu.final, c, &sl);
    j["D"] = D;
    w.text("comparison_D" + tag + ".csv", comparison_csv(sl));
    csv += format_double(D) + "," + format_double(j["l1"].get<double>()) + "," +
           format_double(j["negativity_b"].get<double>()) + "," + format_double(j["negativity_a"].get<double>()) + "," +
           format_double(j["slice_correlation"].get<double>()) + "," + j["regime"].get<std::string>() + "\n";
    rows.push_back(j);
  }
  w.json("sweep.json", {{"t", run_time(c)}, {"rows", rows}});
  w.text("sweep.csv", csv);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

inline Json error_json(ErrorKind kind, const std::string& message) {
  return {{"error", std::string(to_string(kind))}, {"message", message}, {"exit_code", exit_code_for(kind)}};
}

/// Runs one subcommand. Errors are reported through the outcome, never thrown.
inline RunOutcome run(RunConfig c, const RunRequest& req) {
  RunOutcome out;
  ArtifactWriter w(req.out_dir);
  std::optional<std::uint64_t> seed = req.seed ? req.seed : c.seed;
  auto record_error = [&](ErrorKind kind, const std::string& msg) {
    out.exit_code = exit_code_for(kind);
    out.error = error_json(kind, msg);
  };
  bool dir_ok = true;
  try {
    std::filesystem::create_directories(req.out_dir);
  } catch (const std::exception& e) {
    dir_ok = false;
    record_error(ErrorKind::IoError, std::string("cannot create output directory: ") + e.what());
  }
  if (dir_ok) {
    try {
      c.seed = seed;
      validate_for(c, req.subcommand);
      const std::string& s = req.subcommand;
      if (s == "evolve-quantum") detail::cmd_evolve(w, c, KernelKind::Moyal);
      else if (s == "evolve-classical") detail::cmd_evolve(w, c, KernelKind::Classical);
      else if (s == "ensemble") detail::cmd_ensemble(w, c, *seed);
      else if (s == "manifold") detail::cmd_manifold(w, c);
      else if (s == "lyapunov") detail::cmd_lyapunov(w, c, *seed);
      else if (s == "tstar") detail::cmd_tstar(w, c);
      else if (s == "threshold") detail::cmd_threshold(w, c);
      else if (s == "strong-form") detail::cmd_strong_form(w, c);
      else if (s == "local-cumulants") detail::cmd_local_cumulants(w, c, *seed);
      else if (s == "semiclassical") detail::cmd_semiclassical(w, c);
      else if (s == "compare") detail::cmd_compare(w, c);
      else if (s == "sweep") detail::cmd_sweep(w, c);
      else fail(ErrorKind::ValidationError, "unknown subcommand '" + s + "'");
    } catch (const Error& e) {
      record_error(e.kind(), e.what());
    } catch (const std::exception& e) {
      record_error(ErrorKind::NonFiniteState, e.what());
    }
  }
  out.artifacts = w.names();
  if (!dir_ok) return out;

  const std::string canonical = c.echo.dump();
  Json manifest{{"subcommand", req.subcommand},
                {"config", c.echo},
                {"config_hash", "fnv1a64:" + hex64(fnv1a64(canonical))},
                {"seed", seed ? Json(*seed) : Json(nullptr)},
                {"preset", c.preset},
                {"system", to_json(c.system)},
                {"grid", to_json(c.grid)},
                {"versions", {{"qct", version_string}, {"fftw", std::string(fftw_version)}}},
                {"artifacts", out.artifacts},
                {"partial", out.exit_code != 0},
                {"exit_code", out.exit_code},
                {"timestamp", detail::utc_timestamp()}};
  try {
    if (out.error) detail::write_all(req.out_dir / "error.json", out.error->dump(2) + "\n", false);
    else {
      std::error_code ec;  // stale from an earlier failed run
      std::filesystem::remove(req.out_dir / "error.json", ec);
    }
    detail::write_all(req.out_dir / "manifest.json", manifest.dump(2) + "\n", false);
  } catch (const Error& e) {
    if (out.exit_code == 0) record_error(e.kind(), e.what());
  }
  return out;
}

}  // namespace qct
