#pragma once

// Small-noise perturbation theory about a hyperbolic point: the linearized
// Langevin solution, its projection on the stable/unstable directions, the
// closed-form cumulants, and a Monte-Carlo check under the full force.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qct/classical.hpp"
#include "qct/common.hpp"
#include "qct/model.hpp"
#include "qct/rng.hpp"

namespace qct {

/// Rescaled coordinates q' = sqrt(lambda m) dq, p' = dp / sqrt(lambda m),
/// projected as u_(+/-) = (q' +/- p') / sqrt 2 (orthonormal in (q', p')).
struct LocalFrame {
  double lambda = 1.0;
  double m = 1.0;
  double q_eq = 0.0;
  double p_eq = 0.0;

  double u_plus(double q, double p) const {
    const double r = std::sqrt(lambda * m);
    return (r * (q - q_eq) + (p - p_eq) / r) / std::sqrt(2.0);
  }
  double u_minus(double q, double p) const {
    const double r = std::sqrt(lambda * m);
    return (r * (q - q_eq) - (p - p_eq) / r) / std::sqrt(2.0);
  }
};

inline LocalFrame make_frame(double lambda, double m, double q_eq = 0.0, double p_eq = 0.0) {
  require(lambda > 0.0 && m > 0.0, "local frame needs lambda, m > 0");
  return {lambda, m, q_eq, p_eq};
}

struct CumulantSet {
  double t = 0.0;
  double mean_plus = 0.0, mean_minus = 0.0;
  double var_plus = 0.0, var_minus = 0.0, cross = 0.0;
};

/// q(t) = q_eq + C+ e^{lt} + C- e^{-lt} + (1/2ml) int xi(u) (e^{l(t-u)} - e^{-l(t-u)}) du, p = m dq/dt.
/// `xi` holds the force samples at u_k = k t / (xi.size() - 1); trapezoid rule.
inline PhasePoint analytic_trajectory(double c_plus, double c_minus, double lambda, double m, double t,
                                      const std::vector<double>& xi, double q_eq = 0.0) {
  require(lambda > 0.0 && m > 0.0, "analytic_trajectory: lambda, m must be > 0");
  double q = q_eq + c_plus * std::exp(lambda * t) + c_minus * std::exp(-lambda * t);
  double p = m * lambda * (c_plus * std::exp(lambda * t) - c_minus * std::exp(-lambda * t));
  if (xi.size() >= 2 && t > 0.0) {
    const std::size_t n = xi.size() - 1;
    const double h = t / static_cast<double>(n);
    double iq = 0, ip = 0;
    for (std::size_t k = 0; k <= n; ++k) {
      const double w = (k == 0 || k == n) ? 0.5 * h : h;
      const double tau = t - static_cast<double>(k) * h;
      const double ep = std::exp(lambda * tau), em = std::exp(-lambda * tau);
      iq += w * xi[k] * (ep - em);
      ip += w * xi[k] * (ep + em);
    }
    q += iq / (2.0 * m * lambda);
    p += 0.5 * ip;
  }
  return {q, p, t};
}

inline CumulantSet analytic_cumulants(double lambda, double m, double D, double t, double c_plus = 0.0,
                                      double c_minus = 0.0) {
  require(lambda > 0.0 && m > 0.0 && D >= 0.0 && t >= 0.0, "analytic_cumulants: bad arguments");
  CumulantSet c;
  c.t = t;
  const double r = std::sqrt(2.0 * lambda * m);
  c.mean_plus = r * c_plus * std::exp(lambda * t);
  c.mean_minus = r * c_minus * std::exp(-lambda * t);
  const double pre = D / (2.0 * m * lambda * lambda);
  c.var_plus = pre * std::expm1(2.0 * lambda * t);
  c.var_minus = -pre * std::expm1(-2.0 * lambda * t);
  c.cross = -D * t / (m * lambda);
  return c;
}

/// Width of the region smeared transversally by the noise, sqrt(D t / (m lambda)).
inline double smoothing_width(double D, double t, double lambda, double m) {
  require(D >= 0.0 && t >= 0.0 && lambda * m > 0.0, "smoothing_width: bad arguments");
  return std::sqrt(D * t / (m * lambda));
}

struct McCumulantOptions {
  std::size_t n_bootstrap = 200;
  /// LinearRegimeExceeded when mean |q - q_eq| exceeds this fraction of sqrt(A / 2B).
  double linear_fraction = 0.05;
};

struct McCumulants {
  CumulantSet value;
  CumulantSet se;  // bootstrap standard errors (t copied)
  std::size_t n = 0;
  double mean_displacement = 0.0;
};

namespace detail {

inline CumulantSet sample_cumulants(const std::vector<double>& up, const std::vector<double>& um,
                                    const std::vector<std::uint32_t>* idx) {
  const std::size_t n = idx ? idx->size() : up.size();
  auto at = [&](const std::vector<double>& v, std::size_t k) { return idx ? v[(*idx)[k]] : v[k]; };
  // Shift by the first sample: identical samples give exactly zero spread.
  const double op = at(up, 0), om = at(um, 0);
  double sp = 0, sm = 0;
  for (std::size_t k = 0; k < n; ++k) {
    sp += at(up, k) - op;
    sm += at(um, k) - om;
  }
  const double dp = sp / static_cast<double>(n), dm = sm / static_cast<double>(n);
  CumulantSet c;
  c.mean_plus = op + dp;
  c.mean_minus = om + dm;
  double vpp = 0, vmm = 0, vpm = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = at(up, k) - op - dp, b = at(um, k) - om - dm;
    vpp += a * a;
    vmm += b * b;
    vpm += a * b;
  }
  const double dn = n > 1 ? static_cast<double>(n - 1) : 1.0;
  c.var_plus = vpp / dn;
  c.var_minus = vmm / dn;
  c.cross = vpm / dn;
  return c;
}

}  // namespace detail

/// n Langevin trajectories started at the fixed point under the full force,
/// projected on `frame` at time start.t + t.
inline McCumulants mc_cumulants(const PhasePoint& start, const LocalFrame& frame, const SystemParams& s, double t,
                                std::size_t n, double dt, std::uint64_t seed, const McCumulantOptions& opt = {}) {
  require(n >= 2, "mc_cumulants: n must be >= 2");
  std::vector<PhasePoint> pts(n, start);
  auto e = make_ensemble(pts, seed);
  e = evolve_ensemble(std::move(e), start.t + t, dt, s, Stream::Cumulants);

  McCumulants out;
  out.n = n;
  std::vector<double> up(n), um(n);
  double disp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    up[i] = frame.u_plus(e.q[i], e.p[i]);
    um[i] = frame.u_minus(e.q[i], e.p[i]);
    disp += std::abs(e.q[i] - frame.q_eq);
  }
  out.mean_displacement = disp / static_cast<double>(n);
  if (s.B > 0.0 && s.A > 0.0) {
    const double sep = std::sqrt(s.A / (2.0 * s.B));
    if (out.mean_displacement > opt.linear_fraction * sep)
      fail(ErrorKind::LinearRegimeExceeded,
           "mean displacement " + format_double(out.mean_displacement) + " exceeds the linear neighbourhood");
  }
  out.value = detail::sample_cumulants(up, um, nullptr);
  out.value.t = t;
  out.se.t = t;
  if (opt.n_bootstrap >= 2) {
    std::vector<CumulantSet> reps(opt.n_bootstrap);
    parallel_for(opt.n_bootstrap, [&](std::size_t b0, std::size_t b1) {
      std::vector<std::uint32_t> idx(n);
      for (std::size_t b = b0; b < b1; ++b) {
        const NoiseStream rng(seed, Stream::Bootstrap, b);
        for (std::size_t k = 0; k < n; k += 2) {
          const auto u = rng.uniform_pair(k >> 1);
          idx[k] = static_cast<std::uint32_t>(std::min<double>(u[0] * static_cast<double>(n), static_cast<double>(n - 1)));
          if (k + 1 < n)
            idx[k + 1] = static_cast<std::uint32_t>(std::min<double>(u[1] * static_cast<double>(n), static_cast<double>(n - 1)));
        }
        reps[b] = detail::sample_cumulants(up, um, &idx);
      }
    });
    auto sd = [&](double CumulantSet::*field) {
      double m = 0;
      for (const auto& r : reps) m += r.*field;
      m /= static_cast<double>(reps.size());
      double v = 0;
      for (const auto& r : reps) v += (r.*field - m) * (r.*field - m);
      return std::sqrt(v / static_cast<double>(reps.size() - 1));
    };
    out.se.mean_plus = sd(&CumulantSet::mean_plus);
    out.se.mean_minus = sd(&CumulantSet::mean_minus);
    out.se.var_plus = sd(&CumulantSet::var_plus);
    out.se.var_minus = sd(&CumulantSet::var_minus);
    out.se.cross = sd(&CumulantSet::cross);
  }
  return out;
}

inline std::string cumulants_csv_header() {
  return "t,var_plus,var_minus,cross,se_var_plus,se_var_minus,se_cross,mean_plus,mean_minus\n";
}

inline std::string cumulants_csv_row(const CumulantSet& v, const CumulantSet& se) {
  return format_double(v.t) + "," + format_double(v.var_plus) + "," + format_double(v.var_minus) + "," +
         format_double(v.cross) + "," + format_double(se.var_plus) + "," + format_double(se.var_minus) + "," +
         format_double(se.cross) + "," + format_double(v.mean_plus) + "," + format_double(v.mean_minus) + "\n";
}

}  // namespace qct
