#pragma once

// Global chaotic geometry: the time-averaged Lyapunov exponent, stable and
// unstable manifolds of a stroboscopic saddle, fold spacing, the saturation
// time t*, the weak-form threshold, and the strong-form inequalities.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "qct/common.hpp"
#include "qct/grid.hpp"
#include "qct/model.hpp"
#include "qct/rng.hpp"

namespace qct {

// ---------------------------------------------------------------------------
// Lyapunov exponent

struct LyapunovOptions {
  double t_transient = 50.0;  // drive periods discarded before averaging
  double t_average = 500.0;   // drive periods averaged
  std::size_t n_samples = 16;
  std::uint64_t seed = 1;
  std::size_t steps_per_period = default_steps_per_period;
  /// Initial conditions are drawn uniformly from this box.
  double q_center = 0.0, p_center = 0.0, q_half = 1.0, p_half = 1.0;
  /// Start phase of the drive (t0 / T).
  double phase = 0.0;
};

struct LyapunovResult {
  double lambda = 0.0;
  double standard_error = 0.0;
  std::vector<double> samples;
};

/// Largest exponent of one trajectory: tangent propagation, renormalized
/// once per drive period. `angle` sets the initial tangent direction.
inline double lyapunov_sample(PhasePoint z, double angle, std::size_t transient_periods, std::size_t average_periods,
                              const SystemParams& s, std::size_t steps_per_period) {
  const double T = s.period();
  for (std::size_t k = 0; k < transient_periods; ++k) z = stroboscopic_map(z, s, steps_per_period);
  double vq = std::cos(angle), vp = std::sin(angle);
  double log_sum = 0.0;
  for (std::size_t k = 0; k < average_periods; ++k) {
    Mat2 jac;
    z = integrate_tangent(z, jac, T, steps_per_period, s);
    const double nq = jac.a * vq + jac.b * vp, np = jac.c * vq + jac.d * vp;
    const double norm = std::hypot(nq, np);
    log_sum += std::log(norm);
    vq = nq / norm;
    vp = np / norm;
  }
  return log_sum / (static_cast<double>(average_periods) * T);
}

inline LyapunovResult lyapunov_exponent(const SystemParams& s, const LyapunovOptions& opt = {}) {
  s.validate();
  require(opt.n_samples >= 2, "lyapunov_exponent: need at least two samples");
  require(opt.t_average >= 1.0 && opt.t_transient >= 0.0, "lyapunov_exponent: bad averaging window");
  const auto transient = static_cast<std::size_t>(std::llround(opt.t_transient));
  const auto average = static_cast<std::size_t>(std::llround(opt.t_average));
  LyapunovResult r;
  r.samples.resize(opt.n_samples);
  parallel_for(opt.n_samples, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const NoiseStream rng(opt.seed, Stream::Lyapunov, i);
      const auto u = rng.uniform_pair(0);
      const auto v = rng.uniform_pair(1);
      PhasePoint z{opt.q_center + opt.q_half * (2 * u[0] - 1), opt.p_center + opt.p_half * (2 * u[1] - 1),
                   opt.phase * s.period()};
      r.samples[i] = lyapunov_sample(z, 2 * pi * v[0], transient, average, s, opt.steps_per_period);
    }
  });
  double m = 0;
  for (double x : r.samples) m += x;
  m /= static_cast<double>(r.samples.size());
  double v = 0;
  for (double x : r.samples) v += (x - m) * (x - m);
  v /= static_cast<double>(r.samples.size() - 1);
  r.lambda = m;
  r.standard_error = std::sqrt(v / static_cast<double>(r.samples.size()));
  if (!(r.lambda >= 3.0 * r.standard_error))
    fail(ErrorKind::NonChaotic, "lambda " + format_double(r.lambda) + " below 3 standard errors (" +
                                    format_double(r.standard_error) + ")");
  return r;
}

// ---------------------------------------------------------------------------
// Manifolds

struct ManifoldPolyline {
  std::size_t period_index = 0;
  std::vector<PhasePoint> points;
  std::vector<double> arclength;  // cumulative, rescaled coordinates

  double length() const { return arclength.empty() ? 0.0 : arclength.back(); }
};

struct ManifoldOptions {
  std::size_t n_periods = 4;
  double max_spacing = 0.05;  // rescaled coordinates
  double arc_budget = 1e4;
  double epsilon = 1e-4;      // seed segment length, rescaled coordinates
  std::size_t initial_points = 16;
  std::size_t steps_per_period = default_steps_per_period;
  int max_depth = 50;
};

struct ManifoldResult {
  std::vector<ManifoldPolyline> polylines;  // index k = after k periods
  bool budget_exceeded = false;
  double lambda_scale = 1.0;  // lambda used for the rescaling
};

/// (q', p') distance with q' = sqrt(lambda m) q, p' = p / sqrt(lambda m).
struct RescaledMetric {
  double r = 1.0;
  RescaledMetric(double lambda, double m) : r(std::sqrt(lambda * m)) {}
  double dist(const PhasePoint& a, const PhasePoint& b) const { return std::hypot(r * (a.q - b.q), (a.p - b.p) / r); }
};

namespace detail {

inline ManifoldPolyline make_polyline(std::size_t k, std::vector<PhasePoint> pts, const RescaledMetric& metric) {
  ManifoldPolyline pl;
  pl.period_index = k;
  pl.points = std::move(pts);
  pl.arclength.resize(pl.points.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pl.points.size(); ++i) {
    if (i > 0) acc += metric.dist(pl.points[i - 1], pl.points[i]);
    pl.arclength[i] = acc;
  }
  return pl;
}

inline ManifoldResult trace_manifold(const FixedPoint& fp, const SystemParams& s, const ManifoldOptions& opt,
                                     bool unstable) {
  s.validate();
  require(opt.n_periods >= 1, "manifold: n_periods must be >= 1");
  require(opt.max_spacing > 0.0 && opt.epsilon > 0.0 && opt.initial_points >= 2, "manifold: bad options");
  const RescaledMetric metric(fp.lambda, s.m);
  const auto dir = physical_direction(unstable ? fp.unstable_dir : fp.stable_dir, fp.lambda, s.m);
  // Physical length giving a rescaled length epsilon along dir.
  const double unit = metric.dist({0, 0, 0}, {dir[0], dir[1], 0});
  const double len = opt.epsilon / unit;
  const double T = s.period();

  auto step = [&](const PhasePoint& z) {
    return integrate(z, unstable ? T : -T, opt.steps_per_period, s);
  };

  ManifoldResult res;
  res.lambda_scale = fp.lambda;
  std::vector<PhasePoint> cur;
  for (std::size_t i = 0; i < opt.initial_points; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(opt.initial_points - 1);
    cur.push_back({fp.location.q + f * len * dir[0], fp.location.p + f * len * dir[1], fp.location.t});
  }
  res.polylines.push_back(make_polyline(0, cur, metric));

  for (std::size_t k = 1; k <= opt.n_periods; ++k) {
    std::vector<PhasePoint> img(cur.size());
    parallel_for(cur.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) img[i] = step(cur[i]);
    }, 64);
    std::vector<PhasePoint> next;
    next.reserve(2 * img.size());
    next.push_back(img[0]);
    // Midpoints of preimage chords land on the manifold up to an error that
    // the forward (backward) map contracts transversally.
    struct Pending {
      PhasePoint pa, ia, pb, ib;
      int depth;
    };
    for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
      std::vector<Pending> stack{{cur[i], img[i], cur[i + 1], img[i + 1], 0}};
      while (!stack.empty()) {
        const Pending w = stack.back();
        stack.pop_back();
        if (metric.dist(w.ia, w.ib) <= opt.max_spacing || w.depth >= opt.max_depth) {
          next.push_back(w.ib);
          continue;
        }
        const PhasePoint pm{0.5 * (w.pa.q + w.pb.q), 0.5 * (w.pa.p + w.pb.p), w.pa.t};
        const PhasePoint im = step(pm);
        stack.push_back({pm, im, w.pb, w.ib, w.depth + 1});
        stack.push_back({w.pa, w.ia, pm, im, w.depth + 1});
      }
    }
    cur = std::move(next);
    res.polylines.push_back(make_polyline(k, cur, metric));
    if (res.polylines.back().length() > opt.arc_budget && k < opt.n_periods) {
      res.budget_exceeded = true;
      break;
    }
  }
  return res;
}

}  // namespace detail

/// Forward images of a short segment along the unstable eigenvector; polyline
/// k is the image after k periods, refined to opt.max_spacing. If the length
/// passes opt.arc_budget the trace stops early with budget_exceeded set.
inline ManifoldResult trace_unstable_manifold(const FixedPoint& fp, const SystemParams& s,
                                              const ManifoldOptions& opt = {}) {
  return detail::trace_manifold(fp, s, opt, true);
}

/// Same construction under the inverse map along the stable eigenvector.
inline ManifoldResult trace_stable_manifold(const FixedPoint& fp, const SystemParams& s,
                                            const ManifoldOptions& opt = {}) {
  return detail::trace_manifold(fp, s, opt, false);
}

namespace detail {

/// Proper intersection of segments ab and cd; writes the point on success.
inline bool segment_intersection(const PhasePoint& a, const PhasePoint& b, const PhasePoint& c, const PhasePoint& d,
                                 PhasePoint& hit) {
  const double rx = b.q - a.q, ry = b.p - a.p, sx = d.q - c.q, sy = d.p - c.p;
  const double den = rx * sy - ry * sx;
  if (den == 0.0) return false;
  const double ex = c.q - a.q, ey = c.p - a.p;
  const double u = (ex * sy - ey * sx) / den;
  const double v = (ex * ry - ey * rx) / den;
  if (u < 0.0 || u >= 1.0 || v < 0.0 || v >= 1.0) return false;
  hit = {a.q + u * rx, a.p + u * ry, a.t};
  return true;
}

}  // namespace detail

/// Crossing points of two polylines outside a (rescaled) radius around
/// `exclude_center`, found with a uniform bucket grid.
inline std::vector<PhasePoint> intersections(const ManifoldPolyline& a, const ManifoldPolyline& b,
                                             const PhasePoint& exclude_center, double exclude_radius,
                                             const RescaledMetric& metric) {
  std::vector<PhasePoint> hits;
  if (a.points.size() < 2 || b.points.size() < 2) return hits;
  double cell = 0.0;
  for (std::size_t i = 0; i + 1 < b.points.size(); ++i)
    cell = std::max({cell, std::abs(b.points[i + 1].q - b.points[i].q), std::abs(b.points[i + 1].p - b.points[i].p)});
  for (std::size_t i = 0; i + 1 < a.points.size(); ++i)
    cell = std::max({cell, std::abs(a.points[i + 1].q - a.points[i].q), std::abs(a.points[i + 1].p - a.points[i].p)});
  if (cell == 0.0) return hits;
  auto key = [&](double q, double p) {
    const auto iq = static_cast<std::int64_t>(std::floor(q / cell));
    const auto ip = static_cast<std::int64_t>(std::floor(p / cell));
    return (iq << 32) ^ (ip & 0xffffffff);
  };
  std::unordered_map<std::int64_t, std::vector<std::uint32_t>> buckets;
  for (std::size_t j = 0; j + 1 < b.points.size(); ++j) {
    const auto& c = b.points[j];
    const auto& d = b.points[j + 1];
    const auto q0 = static_cast<std::int64_t>(std::floor(std::min(c.q, d.q) / cell));
    const auto q1 = static_cast<std::int64_t>(std::floor(std::max(c.q, d.q) / cell));
    const auto p0 = static_cast<std::int64_t>(std::floor(std::min(c.p, d.p) / cell));
    const auto p1 = static_cast<std::int64_t>(std::floor(std::max(c.p, d.p) / cell));
    for (auto iq = q0; iq <= q1; ++iq)
      for (auto ip = p0; ip <= p1; ++ip) buckets[(iq << 32) ^ (ip & 0xffffffff)].push_back(static_cast<std::uint32_t>(j));
  }
  for (std::size_t i = 0; i + 1 < a.points.size(); ++i) {
    const auto& pa = a.points[i];
    const auto& pb = a.points[i + 1];
    std::vector<std::uint32_t> cand;
    for (double q : {pa.q, pb.q})
      for (double p : {pa.p, pb.p}) {
        auto it = buckets.find(key(q, p));
        if (it != buckets.end()) cand.insert(cand.end(), it->second.begin(), it->second.end());
      }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    for (auto j : cand) {
      PhasePoint hit;
      if (detail::segment_intersection(pa, pb, b.points[j], b.points[j + 1], hit) &&
          metric.dist(hit, exclude_center) > exclude_radius)
        hits.push_back(hit);
    }
  }
  return hits;
}

/// Signed positions (rescaled length along `dir`) where the polyline crosses
/// the line through `origin` with physical direction `dir`; sorted.
inline std::vector<double> line_crossings(const ManifoldPolyline& pl, const PhasePoint& origin,
                                          const std::array<double, 2>& dir, const RescaledMetric& metric) {
  std::vector<double> out;
  const double nq = -dir[1], np = dir[0];  // normal
  auto side = [&](const PhasePoint& z) { return (z.q - origin.q) * nq + (z.p - origin.p) * np; };
  const double unit = metric.dist({0, 0, 0}, {dir[0], dir[1], 0});
  for (std::size_t i = 0; i + 1 < pl.points.size(); ++i) {
    const double s0 = side(pl.points[i]), s1 = side(pl.points[i + 1]);
    if ((s0 < 0.0 && s1 >= 0.0) || (s0 >= 0.0 && s1 < 0.0)) {
      const double f = s0 / (s0 - s1);
      const double q = pl.points[i].q + f * (pl.points[i + 1].q - pl.points[i].q);
      const double p = pl.points[i].p + f * (pl.points[i + 1].p - pl.points[i].p);
      out.push_back(((q - origin.q) * dir[0] + (p - origin.p) * dir[1]) * unit);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// l(t) = prefactor e^{-lambda t}.
inline double fold_spacing(double t, double prefactor, double lambda_bar) {
  require(prefactor > 0.0, "fold_spacing: prefactor must be > 0");
  return prefactor * std::exp(-lambda_bar * t);
}

/// Median gap between neighbouring crossings of a transversal line, or NaN
/// when fewer than two crossings exist.
inline double empirical_fold_spacing(const ManifoldPolyline& pl, const PhasePoint& origin,
                                     const std::array<double, 2>& dir, const RescaledMetric& metric) {
  const auto xs = line_crossings(pl, origin, dir, metric);
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> gaps;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) gaps.push_back(xs[i + 1] - xs[i]);
  std::sort(gaps.begin(), gaps.end());
  const std::size_t n = gaps.size();
  return n % 2 ? gaps[n / 2] : 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]);
}

// ---------------------------------------------------------------------------
// t* and the threshold

inline double tstar_residual(double t, double D, double m, double lambda_bar, double prefactor) {
  return prefactor * std::exp(-lambda_bar * t) - std::sqrt(D * t / (m * lambda_bar));
}

/// Root of prefactor e^{-l t} = sqrt(D t / (m l)) by bisection on (0, t_max].
inline double solve_tstar(double D, double m, double lambda_bar, double prefactor, double t_max = 1e3) {
  require(D > 0.0 && m > 0.0 && lambda_bar > 0.0 && prefactor > 0.0 && t_max > 0.0, "solve_tstar: arguments must be > 0");
  if (tstar_residual(t_max, D, m, lambda_bar, prefactor) > 0.0) fail(ErrorKind::NoRoot, "no sign change below t_max");
  double lo = 0.0, hi = t_max;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (tstar_residual(mid, D, m, lambda_bar, prefactor) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Prefactor that puts the root of the t* relation at t_target.
inline double calibrate_prefactor(double D, double t_target, double m, double lambda_bar) {
  require(D > 0.0 && t_target > 0.0 && m > 0.0 && lambda_bar > 0.0, "calibrate_prefactor: arguments must be > 0");
  return std::sqrt(D * t_target / (m * lambda_bar)) * std::exp(lambda_bar * t_target);
}

struct ThresholdReport {
  double D = 0, m = 0, lambda_bar = 0, hbar = 0, prefactor = 0;
  double t_star = 0;
  double lhs = 0;  // D t*
  double rhs = 0;  // lambda_bar m hbar
  bool satisfied = false;
  double margin = 0;
  double S = 0;  // l(t*)^2
  double S_over_hbar = 0;
};

inline ThresholdReport threshold_report(double D, double t_star, double m, double lambda_bar, double hbar,
                                        double prefactor) {
  require(D > 0.0 && t_star > 0.0 && m > 0.0 && lambda_bar > 0.0 && hbar > 0.0 && prefactor > 0.0,
          "threshold_report: inputs must be > 0");
  ThresholdReport r;
  r.D = D;
  r.m = m;
  r.lambda_bar = lambda_bar;
  r.hbar = hbar;
  r.prefactor = prefactor;
  r.t_star = t_star;
  r.lhs = D * t_star;
  r.rhs = lambda_bar * m * hbar;
  r.margin = r.lhs / r.rhs;
  r.satisfied = r.margin >= 1.0;
  const double l = fold_spacing(t_star, prefactor, lambda_bar);
  r.S = l * l;
  r.S_over_hbar = r.S / hbar;
  return r;
}

// ---------------------------------------------------------------------------
// Strong-form inequalities

struct StrongFormParams {
  double k = 10.0;    // measurement strength
  double eta = 1.0;   // efficiency; carried through, not used by the inequalities
  double s = 1.0;     // typical action, dimensionless
  double F = 0.0, dF = 0.0, d2F = 0.0;
  double m = 1.0, hbar = 0.1;
};

struct StrongFormCheck {
  double R = 10.0;
  double loc_weak = 0, loc_strong = 0, lownoise_lower = 0, lownoise_upper = 0;  // ratios
  bool loc_weak_ok = false, loc_strong_ok = false, lownoise_lower_ok = false, lownoise_upper_ok = false;
};

inline StrongFormCheck strong_form_check(const StrongFormParams& sp, double R = 10.0) {
  require(sp.k > 0.0 && sp.s > 0.0 && sp.eta > 0.0 && sp.eta <= 1.0 && sp.m > 0.0 && sp.hbar > 0.0,
          "strong_form_check: parameters out of range");
  require(R > 0.0, "strong_form_check: R must be > 0");
  if (sp.F == 0.0) fail(ErrorKind::DegenerateForce, "force vanishes at the evaluation point");
  const double inf = std::numeric_limits<double>::infinity();
  auto ratio = [&](double big, double small) { return small == 0.0 ? inf : big / small; };
  StrongFormCheck c;
  c.R = R;
  const double F2 = sp.F * sp.F, g2 = sp.d2F * sp.d2F, adf = std::abs(sp.dF);
  c.loc_weak = ratio(8.0 * sp.k, std::sqrt(g2 * adf / (2.0 * sp.m * F2)));
  c.loc_strong = ratio(8.0 * sp.k, g2 * sp.hbar / (4.0 * sp.m * F2));
  c.lownoise_lower = ratio(sp.hbar * sp.k, 2.0 * adf / sp.s);
  c.lownoise_upper = ratio(adf * sp.s / 4.0, sp.hbar * sp.k);
  c.loc_weak_ok = c.loc_weak >= R;
  c.loc_strong_ok = c.loc_strong >= R;
  c.lownoise_lower_ok = c.lownoise_lower >= R;
  c.lownoise_upper_ok = c.lownoise_upper >= R;
  return c;
}

/// Force and derivatives of the model at (q, t) packed for strong_form_check.
inline StrongFormParams strong_form_params(double q, double t, const SystemParams& s, double k, double eta,
                                           double action) {
  StrongFormParams sp;
  sp.k = k;
  sp.eta = eta;
  sp.s = action;
  sp.F = force(q, t, s);
  sp.dF = force_gradient(q, s);
  sp.d2F = -24.0 * s.B * q;
  sp.m = s.m;
  sp.hbar = s.hbar;
  return sp;
}

// ---------------------------------------------------------------------------
// Manifold CSV

inline std::string manifold_csv(const std::vector<ManifoldPolyline>& pls) {
  std::string out = "period,arclength,q,p\n";
  for (const auto& pl : pls)
    for (std::size_t i = 0; i < pl.points.size(); ++i)
      out += std::to_string(pl.period_index) + "," + format_double(pl.arclength[i]) + "," +
             format_double(pl.points[i].q) + "," + format_double(pl.points[i].p) + "\n";
  return out;
}

}  // namespace qct
