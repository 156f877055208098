#pragma once

// Semiclassical Wigner function of a transported Lagrangian curve under the
// Gaussian momentum-diffusion filter. The curve carries, per sample, the
// trajectory action, the Jacobian dq_t/dq0 and a Maslov count; the Wigner
// function is evaluated by direct X-quadrature of the pair sum
//
//   W(q,p) = 1/(2 pi hbar) int dX exp(-D t X^2 / 2 hbar^2) exp(-i p X / hbar)
//            sum_{i,j} a_i(q+X/2) a_j(q-X/2) exp(i [Phi_i(q+X/2) - Phi_j(q-X/2)] / hbar)
//                       exp(-i pi (nu_i - nu_j) / 2),
//
// with a = 1/sqrt|J| (unit transport weight) and Phi the total action.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "qct/common.hpp"
#include "qct/grid.hpp"
#include "qct/model.hpp"

namespace qct {

struct BranchPoint {
  double q0 = 0.0;
  double q_t = 0.0, p_t = 0.0;
  double J = 1.0;   // dq_t / dq0
  double dp = 0.0;  // dp_t / dq0
  double S0 = 0.0;  // initial generating function int p0 dq
  double S = 0.0;   // accumulated int p dq - H dt
  int nu = 0;       // sign changes of J along the trajectory
  bool caustic = false;

  double phase() const { return S0 + S; }
};

/// A sampled Lagrangian curve. Usually one component; synthetic tests may
/// supply several disjoint sheets.
struct BranchSet {
  std::vector<std::vector<BranchPoint>> components;
  double t = 0.0;
  std::string source;
  bool caustic_unresolved = false;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& c : components) n += c.size();
    return n;
  }
};

struct Branch {
  double p = 0.0, J = 1.0, S = 0.0;  // S: total phase action at q
  int nu = 0;
  std::size_t component = 0, segment = 0;
};

struct CurveOptions {
  std::size_t steps_per_period = default_steps_per_period;
  double max_gap = 0.02;      // (q, p) distance between neighbours after transport
  std::size_t max_samples = 200000;
  double caustic_tol = 1e-6;  // |J| below this marks a sample as caustic
};

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 64) {
  if (a == b) return 0.0;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Transports one sample with kick-drift-kick, accumulating the discrete
/// Lagrangian action and the tangent (dq, dp) / dq0.
inline BranchPoint transport(double q0, const std::function<double(double)>& p0_of_q, double S0, double t0,
                             double t_final, std::size_t steps, const SystemParams& s, double caustic_tol) {
  BranchPoint b;
  b.q0 = q0;
  b.S0 = S0;
  const double h = 1e-6 * std::max(1.0, std::abs(q0));
  double q = q0, p = p0_of_q(q0);
  double tq = 1.0, tp = (p0_of_q(q0 + h) - p0_of_q(q0 - h)) / (2 * h);
  const double dt = (t_final - t0) / static_cast<double>(steps);
  double S = 0.0;
  int nu = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double tm = t0 + (static_cast<double>(k) + 0.5) * dt;
    const double Vq = potential_derivatives(q, tm, s).V;
    p += 0.5 * dt * force(q, tm, s);
    tp += 0.5 * dt * force_gradient(q, s) * tq;
    const double prev = tq;
    q += dt * p / s.m;
    tq += dt * tp / s.m;
    const double Vq1 = potential_derivatives(q, tm, s).V;
    S += dt * (0.5 * p * p / s.m - 0.5 * (Vq + Vq1));
    p += 0.5 * dt * force(q, tm, s);
    tp += 0.5 * dt * force_gradient(q, s) * tq;
    if ((prev > 0.0 && tq <= 0.0) || (prev < 0.0 && tq >= 0.0)) ++nu;
  }
  if (!std::isfinite(q) || !std::isfinite(p) || !std::isfinite(S)) fail(ErrorKind::NonFiniteState, "curve sample diverged");
  b.q_t = q;
  b.p_t = p;
  b.J = tq;
  b.dp = tp;
  b.S = S;
  b.nu = nu;
  b.caustic = std::abs(tq) < caustic_tol;
  return b;
}

}  // namespace detail

/// Transports the curve p = p0_of_q(q), q in [q_lo, q_hi], for t_final from
/// t0, inserting samples until neighbours are within opt.max_gap.
inline BranchSet evolve_lagrangian_curve(const std::function<double(double)>& p0_of_q, double q_lo, double q_hi,
                                         std::size_t n_samples, double t_final, const SystemParams& s,
                                         const CurveOptions& opt = {}, double t0 = 0.0) {
  s.validate();
  require(n_samples >= 64, "evolve_lagrangian_curve: n_samples must be >= 64");
  require(q_hi > q_lo, "evolve_lagrangian_curve: empty q range");
  require(t_final >= t0, "evolve_lagrangian_curve: t_final precedes t0");
  const double span = t_final - t0;
  const auto steps = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(span / s.period() * static_cast<double>(opt.steps_per_period) - 1e-9)));

  auto make = [&](double q0, double S0) {
    return detail::transport(q0, p0_of_q, S0, t0, t_final, steps, s, opt.caustic_tol);
  };

  std::vector<BranchPoint> pts(n_samples);
  std::vector<double> q0s(n_samples), S0s(n_samples, 0.0);
  for (std::size_t i = 0; i < n_samples; ++i)
    q0s[i] = q_lo + (q_hi - q_lo) * static_cast<double>(i) / static_cast<double>(n_samples - 1);
  for (std::size_t i = 1; i < n_samples; ++i) S0s[i] = S0s[i - 1] + detail::simpson(p0_of_q, q0s[i - 1], q0s[i]);
  parallel_for(n_samples, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) pts[i] = make(q0s[i], S0s[i]);
  }, 16);

  auto gap = [](const BranchPoint& a, const BranchPoint& b) { return std::hypot(a.q_t - b.q_t, a.p_t - b.p_t); };
  bool unresolved = false;
  for (int pass = 0; pass < 60; ++pass) {
    std::vector<BranchPoint> next;
    next.reserve(pts.size() * 2);
    bool inserted = false;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      next.push_back(pts[i]);
      const auto& a = pts[i];
      const auto& b = pts[i + 1];
      const bool wide = gap(a, b) > opt.max_gap || std::abs(a.nu - b.nu) > 1;
      const double qm = 0.5 * (a.q0 + b.q0);
      if (wide && qm > a.q0 && qm < b.q0 && pts.size() + 1 < opt.max_samples) {
        next.push_back(make(qm, a.S0 + detail::simpson(p0_of_q, a.q0, qm)));
        inserted = true;
      }
    }
    next.push_back(pts.back());
    pts = std::move(next);
    if (!inserted) break;
  }
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    if (std::abs(pts[i].nu - pts[i + 1].nu) > 1) unresolved = true;
  if (unresolved) fail(ErrorKind::CausticUnresolved, "J changes sign more than once between adjacent samples");

  BranchSet set;
  set.components.push_back(std::move(pts));
  set.t = t_final;
  set.source = "p0(q) on [" + format_double(q_lo) + ", " + format_double(q_hi) + "]";
  return set;
}

/// Straight synthetic sheet p = p_value on [q_a, q_b] with unit Jacobian;
/// its action is p_value (q - q_a) + phase0.
inline std::vector<BranchPoint> straight_sheet(double q_a, double q_b, double p_value, std::size_t n, double phase0 = 0.0) {
  require(n >= 2 && q_b > q_a, "straight_sheet: bad arguments");
  std::vector<BranchPoint> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double q = q_a + (q_b - q_a) * static_cast<double>(i) / static_cast<double>(n - 1);
    out[i].q0 = q;
    out[i].q_t = q;
    out[i].p_t = p_value;
    out[i].S0 = phase0;
    out[i].S = p_value * (q - q_a);
  }
  return out;
}

namespace detail {

struct Piece {
  std::size_t component, first, last;  // sample index range, q monotone
  bool increasing;
  double lo, hi;
};

inline std::vector<Piece> monotone_pieces(const BranchSet& set) {
  std::vector<Piece> out;
  for (std::size_t c = 0; c < set.components.size(); ++c) {
    const auto& v = set.components[c];
    if (v.size() < 2) continue;
    std::size_t start = 0;
    int dir = 0;
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const double d = v[k + 1].q_t - v[k].q_t;
      const int sd = d > 0 ? 1 : (d < 0 ? -1 : 0);
      if (dir == 0) dir = sd;
      else if (sd != 0 && sd != dir) {
        out.push_back({c, start, k, dir > 0, 0, 0});
        start = k;
        dir = sd;
      }
    }
    out.push_back({c, start, v.size() - 1, dir >= 0, 0, 0});
  }
  for (auto& p : out) {
    const auto& v = set.components[p.component];
    p.lo = std::min(v[p.first].q_t, v[p.last].q_t);
    p.hi = std::max(v[p.first].q_t, v[p.last].q_t);
  }
  return out;
}

/// Crossing of a monotone piece with the vertical line at x, if any.
inline bool piece_branch(const BranchSet& set, const Piece& pc, double x, Branch& out) {
  if (!(x >= pc.lo && x < pc.hi) && !(x == pc.hi && pc.hi == pc.lo)) return false;
  const auto& v = set.components[pc.component];
  // First sample index k in [first, last) with the segment [k, k+1] bracketing x.
  std::size_t lo = pc.first, hi = pc.last;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    const bool before = pc.increasing ? v[mid].q_t <= x : v[mid].q_t >= x;
    (before ? lo : hi) = mid;
  }
  const BranchPoint& a = v[lo];
  const BranchPoint& b = v[lo + 1];
  const double dq = b.q_t - a.q_t;
  const double f = dq != 0.0 ? (x - a.q_t) / dq : 0.0;
  out.p = a.p_t + f * (b.p_t - a.p_t);
  out.J = a.J + f * (b.J - a.J);
  out.S = a.phase() + 0.5 * (x - a.q_t) * (a.p_t + out.p);
  out.nu = (a.nu == b.nu || f < 0.5) ? a.nu : b.nu;
  out.component = pc.component;
  out.segment = lo;
  return true;
}

}  // namespace detail

/// Branches of the curve above position q, ordered along the curve.
inline std::vector<Branch> branches_at(double q, const BranchSet& set) {
  std::vector<Branch> out;
  for (const auto& pc : detail::monotone_pieces(set)) {
    Branch b;
    if (detail::piece_branch(set, pc, q, b)) out.push_back(b);
  }
  if (out.empty()) fail(ErrorKind::NoBranches, "curve does not reach q = " + format_double(q));
  return out;
}

/// X beyond which the filter damps contributions, hbar / sqrt(D t).
inline double filter_cutoff(double D, double t, double hbar) {
  require(D >= 0.0 && t >= 0.0 && hbar > 0.0, "filter_cutoff: bad arguments");
  if (!(D * t > 0.0)) fail(ErrorKind::DegenerateFilter, "D t = 0: the cutoff is infinite");
  return hbar / std::sqrt(D * t);
}

enum class PairTerms { All, Diagonal };

struct WignerOptions {
  double X_max = 0.0;
  std::size_t n_X = 1024;  // trapezoid intervals over [-X_max, X_max]
  PairTerms terms = PairTerms::All;
  /// |J| floor as a fraction of the median |J| over the set.
  double amplitude_floor = 1e-6;
};

struct WignerValue {
  double value = 0.0;
  double imag_residue = 0.0;
  bool caustic_on_path = false;
};

namespace detail {

inline double median_abs_J(const BranchSet& set) {
  std::vector<double> js;
  for (const auto& c : set.components)
    for (const auto& b : c) js.push_back(std::abs(b.J));
  if (js.empty()) return 1.0;
  std::nth_element(js.begin(), js.begin() + static_cast<long>(js.size() / 2), js.end());
  return js[js.size() / 2];
}

}  // namespace detail

/// Evaluates the filtered semiclassical Wigner function at fixed q for each
/// momentum in `ps` (the X-integrand is built once per q).
inline std::vector<WignerValue> noise_averaged_wigner_row(const BranchSet& set, double q, const std::vector<double>& ps,
                                                          double D, double t, double hbar, const WignerOptions& opt) {
  require(hbar > 0.0 && D >= 0.0 && t >= 0.0, "noise_averaged_wigner: bad arguments");
  require(opt.n_X >= 512, "noise_averaged_wigner: n_X must be >= 512");
  require(opt.X_max > 0.0, "noise_averaged_wigner: X_max must be > 0");
  const auto pieces = detail::monotone_pieces(set);
  if (D * t > 0.0) {
    double span_lo = std::numeric_limits<double>::infinity(), span_hi = -span_lo;
    for (const auto& pc : pieces) {
      span_lo = std::min(span_lo, pc.lo);
      span_hi = std::max(span_hi, pc.hi);
    }
    const double scale = std::min(filter_cutoff(D, t, hbar), span_hi - span_lo);
    require(opt.X_max >= 5.0 * scale - 1e-12, "noise_averaged_wigner: X window narrower than 5 x the filter scale");
  }
  {
    // Interference midway between sheets is real, so only a curve that
    // misses the whole window [q - X_max/2, q + X_max/2] is an error.
    bool any = false;
    for (const auto& pc : pieces) any = any || (pc.hi >= q - 0.5 * opt.X_max && pc.lo <= q + 0.5 * opt.X_max);
    if (!any) fail(ErrorKind::NoBranches, "curve does not reach the window around q = " + format_double(q));
  }
  const double floor_J = opt.amplitude_floor * detail::median_abs_J(set);
  const std::size_t n = opt.n_X;
  const double h = 2.0 * opt.X_max / static_cast<double>(n);
  const double c = D * t / (2.0 * hbar * hbar);
  bool caustic = false;
  std::vector<std::complex<double>> g(n + 1);
  std::vector<double> xs(n + 1);
  std::vector<Branch> up, dn;
  std::vector<std::size_t> up_piece, dn_piece;
  for (std::size_t k = 0; k <= n; ++k) {
    const double X = -opt.X_max + static_cast<double>(k) * h;
    xs[k] = X;
    up.clear();
    dn.clear();
    up_piece.clear();
    dn_piece.clear();
    for (std::size_t ip = 0; ip < pieces.size(); ++ip) {
      Branch b;
      if (detail::piece_branch(set, pieces[ip], q + 0.5 * X, b)) {
        up.push_back(b);
        up_piece.push_back(ip);
      }
      if (detail::piece_branch(set, pieces[ip], q - 0.5 * X, b)) {
        dn.push_back(b);
        dn_piece.push_back(ip);
      }
    }
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < up.size(); ++i) {
      for (std::size_t j = 0; j < dn.size(); ++j) {
        if (opt.terms == PairTerms::Diagonal && up_piece[i] != dn_piece[j]) continue;
        double Ji = std::abs(up[i].J), Jj = std::abs(dn[j].J);
        if (Ji < floor_J || Jj < floor_J) caustic = true;
        Ji = std::max(Ji, floor_J);
        Jj = std::max(Jj, floor_J);
        const double phase = (up[i].S - dn[j].S) / hbar - 0.5 * pi * (up[i].nu - dn[j].nu);
        acc += std::polar(1.0 / std::sqrt(Ji * Jj), phase);
      }
    }
    const double w = (k == 0 || k == n) ? 0.5 * h : h;
    g[k] = acc * (w * std::exp(-c * X * X) / (2.0 * pi * hbar));
  }
  std::vector<WignerValue> out(ps.size());
  parallel_for(ps.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t m = b; m < e; ++m) {
      std::complex<double> s = 0.0;
      for (std::size_t k = 0; k <= n; ++k) s += g[k] * std::polar(1.0, -ps[m] * xs[k] / hbar);
      out[m] = {s.real(), s.imag(), caustic};
    }
  }, 8);
  return out;
}

inline WignerValue noise_averaged_wigner(const BranchSet& set, double q, double p, double D, double t, double hbar,
                                         const WignerOptions& opt) {
  return noise_averaged_wigner_row(set, q, {p}, D, t, hbar, opt).front();
}

/// Evaluates on every node of `g` (rows in q); kind = wigner. Rows whose
/// window misses the curve stay zero.
inline PhaseSpaceField semiclassical_field(const BranchSet& set, const PhaseSpaceGrid& g, double D, double t,
                                           double hbar, const WignerOptions& opt, bool* caustic_on_path = nullptr) {
  PhaseSpaceField f(g, FieldKind::Wigner, hbar, t);
  std::vector<double> ps(g.n_p);
  for (std::size_t j = 0; j < g.n_p; ++j) ps[j] = g.p(j);
  bool caustic = false;
  for (std::size_t i = 0; i < g.n_q; ++i) {
    std::vector<WignerValue> row;
    try {
      row = noise_averaged_wigner_row(set, g.q(i), ps, D, t, hbar, opt);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoBranches) throw;
      continue;  // curve does not reach this q
    }
    for (std::size_t j = 0; j < g.n_p; ++j) {
      f.at(i, j) = row[j].value;
      caustic = caustic || row[j].caustic_on_path;
    }
  }
  if (caustic_on_path) *caustic_on_path = caustic;
  return f;
}

inline std::string branch_csv(const BranchSet& set) {
  std::string out = "q0,q_t,p_t,J,S,nu\n";
  for (const auto& c : set.components)
    for (const auto& b : c)
      out += format_double(b.q0) + "," + format_double(b.q_t) + "," + format_double(b.p_t) + "," + format_double(b.J) +
             "," + format_double(b.S) + "," + std::to_string(b.nu) + "\n";
  return out;
}

}  // namespace qct
