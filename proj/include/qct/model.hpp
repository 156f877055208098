#pragma once

// Driven Duffing oscillator H = p^2/2m + B x^4 - A x^2 + Lambda x cos(omega t):
// potential and derivatives, the symplectic flow, its stroboscopic map, and
// location/linearization of hyperbolic fixed points of that map.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "qct/common.hpp"

namespace qct {

struct SystemParams {
  double m = 1.0;
  double A = 10.0;
  double B = 0.5;
  double Lambda = 10.0;
  double omega = 6.07;
  double hbar = 0.1;
  double D = 0.0;

  /// Environment coupling of the position-measurement Lindbladian; D = hbar^2 k_env.
  double k_env() const { return D / (hbar * hbar); }
  double period() const { return 2.0 * pi / omega; }

  /// B = 0 is accepted so that harmonic (A < 0) and free (A = 0) reference
  /// systems can run through the same propagators.
  void validate() const {
    auto bad = [](const char* what) { fail(ErrorKind::ValidationError, what); };
    if (!(m > 0.0) || !std::isfinite(m)) bad("m must be > 0");
    if (!(B >= 0.0) || !std::isfinite(B)) bad("B must be >= 0");
    if (!(omega > 0.0) || !std::isfinite(omega)) bad("omega must be > 0");
    if (!(hbar > 0.0) || !std::isfinite(hbar)) bad("hbar must be > 0");
    if (!(D >= 0.0) || !std::isfinite(D)) bad("D must be >= 0");
    if (!std::isfinite(A) || !std::isfinite(Lambda)) bad("A and Lambda must be finite");
  }

  /// The chaotic benchmark: A = Lambda = 10, B = 0.5, omega = 6.07, hbar = 0.1, m = 1.
  static SystemParams duffing_paper(double diffusion = 0.0) {
    SystemParams s;
    s.D = diffusion;
    return s;
  }

  /// V = k q^2 / 2 expressed in Duffing coefficients.
  static SystemParams harmonic(double k, double hbar = 0.1, double diffusion = 0.0) {
    SystemParams s;
    s.A = -0.5 * k;
    s.B = 0.0;
    s.Lambda = 0.0;
    s.hbar = hbar;
    s.D = diffusion;
    return s;
  }

  static SystemParams free_particle(double hbar = 0.1, double diffusion = 0.0) { return harmonic(0.0, hbar, diffusion); }
};

struct PotentialDerivatives {
  double V;
  double dV;
  double d2V;
  double d3V;  // all higher derivatives vanish identically
};

inline double drive(double t, const SystemParams& s) { return s.Lambda * std::cos(s.omega * t); }

inline PotentialDerivatives potential_derivatives(double x, double t, const SystemParams& s) {
  const double x2 = x * x;
  const double c = drive(t, s);
  return {s.B * x2 * x2 - s.A * x2 + c * x, 4.0 * s.B * x2 * x - 2.0 * s.A * x + c, 12.0 * s.B * x2 - 2.0 * s.A,
          24.0 * s.B * x};
}

/// Time-independent part of V'(x); V'(x,t) = static_gradient(x) + Lambda cos(omega t).
inline double static_gradient(double x, const SystemParams& s) { return 4.0 * s.B * x * x * x - 2.0 * s.A * x; }

inline double force(double x, double t, const SystemParams& s) { return -(static_gradient(x, s) + drive(t, s)); }

/// d force / dx = -V''(x); the drive is linear in x and drops out.
inline double force_gradient(double x, const SystemParams& s) { return 2.0 * s.A - 12.0 * s.B * x * x; }

inline double energy(double q, double p, double t, const SystemParams& s) {
  return 0.5 * p * p / s.m + potential_derivatives(q, t, s).V;
}

// ---------------------------------------------------------------------------
// Kick-drift-kick with the force frozen at the midpoint time of the step.

inline void kdk_step(double& q, double& p, double t, double dt, const SystemParams& s) {
  const double tm = t + 0.5 * dt;
  p += 0.5 * dt * force(q, tm, s);
  q += dt * p / s.m;
  p += 0.5 * dt * force(q, tm, s);
}

struct Mat2 {
  double a = 1, b = 0, c = 0, d = 1;  // [[a b] [c d]]

  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }
  Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
};

/// Same step as kdk_step, also advancing the tangent map (columns of `jac`).
inline void kdk_step_tangent(double& q, double& p, Mat2& jac, double t, double dt, const SystemParams& s) {
  const double tm = t + 0.5 * dt;
  const double h = 0.5 * dt;
  p += h * force(q, tm, s);
  double g = h * force_gradient(q, s);
  jac.c += g * jac.a;
  jac.d += g * jac.b;
  q += dt * p / s.m;
  jac.a += dt / s.m * jac.c;
  jac.b += dt / s.m * jac.d;
  p += h * force(q, tm, s);
  g = h * force_gradient(q, s);
  jac.c += g * jac.a;
  jac.d += g * jac.b;
}

/// Integrates Hamilton's equations (D = 0) for `duration` (may be negative)
/// with `steps` equal kick-drift-kick steps.
inline PhasePoint integrate(PhasePoint z, double duration, std::size_t steps, const SystemParams& s) {
  require(steps > 0, "integrate: steps must be > 0");
  const double dt = duration / static_cast<double>(steps);
  double q = z.q, p = z.p;
  for (std::size_t k = 0; k < steps; ++k) kdk_step(q, p, z.t + static_cast<double>(k) * dt, dt, s);
  PhasePoint out{q, p, z.t + duration};
  if (!out.finite()) fail(ErrorKind::NonFiniteState, "trajectory left the finite range");
  return out;
}

inline PhasePoint integrate_tangent(PhasePoint z, Mat2& jac, double duration, std::size_t steps,
                                    const SystemParams& s) {
  require(steps > 0, "integrate_tangent: steps must be > 0");
  const double dt = duration / static_cast<double>(steps);
  double q = z.q, p = z.p;
  for (std::size_t k = 0; k < steps; ++k) kdk_step_tangent(q, p, jac, z.t + static_cast<double>(k) * dt, dt, s);
  PhasePoint out{q, p, z.t + duration};
  if (!out.finite() || !std::isfinite(jac.a + jac.b + jac.c + jac.d))
    fail(ErrorKind::NonFiniteState, "trajectory left the finite range");
  return out;
}

inline constexpr std::size_t default_steps_per_period = 2000;

/// One drive period of deterministic flow. The sampling phase is whatever
/// start.t carries; the map is defined for any phase.
inline PhasePoint stroboscopic_map(PhasePoint start, const SystemParams& s,
                                   std::size_t steps_per_period = default_steps_per_period) {
  require(steps_per_period >= 100, "stroboscopic_map: steps_per_period must be >= 100");
  return integrate(start, s.period(), steps_per_period, s);
}

inline PhasePoint inverse_stroboscopic_map(PhasePoint start, const SystemParams& s,
                                           std::size_t steps_per_period = default_steps_per_period) {
  require(steps_per_period >= 100, "inverse_stroboscopic_map: steps_per_period must be >= 100");
  return integrate(start, -s.period(), steps_per_period, s);
}

inline Mat2 monodromy(PhasePoint z, const SystemParams& s, std::size_t steps_per_period = default_steps_per_period) {
  Mat2 jac;
  integrate_tangent(z, jac, s.period(), steps_per_period, s);
  return jac;
}

// ---------------------------------------------------------------------------

struct FixedPoint {
  PhasePoint location;
  double lambda = 0.0;  // ln|mu_unstable| / T
  double mu_unstable = 0.0;
  double mu_stable = 0.0;
  /// Unit vectors in rescaled coordinates q' = sqrt(lambda m) q, p' = p / sqrt(lambda m).
  std::array<double, 2> stable_dir{};
  std::array<double, 2> unstable_dir{};
  double residual = 0.0;
  Mat2 monodromy;
  int iterations = 0;
};

struct SaddleOptions {
  std::size_t steps_per_period = default_steps_per_period;
  int max_iterations = 60;
  double fd_step = 1e-6;      // in rescaled coordinates
  double unit_circle_tol = 1e-8;
};

/// Converts a rescaled-coordinate direction to a physical (dq, dp) direction.
inline std::array<double, 2> physical_direction(const std::array<double, 2>& v, double lambda, double m) {
  const double s = std::sqrt(lambda * m);
  const double dq = v[0] / s, dp = v[1] * s;
  const double n = std::hypot(dq, dp);
  return {dq / n, dp / n};
}

namespace detail {

inline std::array<double, 2> eigenvector(const Mat2& M, double mu) {
  // (M - mu) v = 0; pick the better conditioned of the two row equations.
  std::array<double, 2> v1{M.b, mu - M.a}, v2{mu - M.d, M.c};
  return std::hypot(v1[0], v1[1]) >= std::hypot(v2[0], v2[1]) ? v1 : v2;
}

inline std::array<double, 2> rescaled_unit(std::array<double, 2> v, double lambda, double m) {
  const double s = std::sqrt(lambda * m);
  v = {v[0] * s, v[1] / s};
  const double n = std::hypot(v[0], v[1]);
  v = {v[0] / n, v[1] / n};
  if (v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0)) v = {-v[0], -v[1]};
  return v;
}

}  // namespace detail

/// Newton iteration on map(z) - z with a central-difference Jacobian, then
/// monodromy eigen-analysis at the converged point.
inline FixedPoint find_saddle(const SystemParams& s, PhasePoint guess, double tol, const SaddleOptions& opt = {}) {
  s.validate();
  require(tol > 0.0, "find_saddle: tol must be > 0");
  const double T = s.period();
  // Scale from the instantaneous curvature at the guess; only conditions the FD steps.
  const double curv = std::max(-potential_derivatives(guess.q, guess.t, s).d2V / s.m, 1e-6);
  const double scale = std::sqrt(std::sqrt(curv) * s.m);
  const double hq = opt.fd_step / scale, hp = opt.fd_step * scale;

  auto G = [&](double q, double p) {
    const PhasePoint img = stroboscopic_map({q, p, guess.t}, s, opt.steps_per_period);
    return std::array<double, 2>{img.q - q, img.p - p};
  };

  double q = guess.q, p = guess.p;
  auto g = G(q, p);
  double residual = std::hypot(g[0], g[1]);
  int it = 0;
  while (residual >= tol) {
    if (++it > opt.max_iterations) fail(ErrorKind::NoConvergence, "Newton exceeded iteration budget");
    const auto gqp = G(q + hq, p), gqm = G(q - hq, p), gpp = G(q, p + hp), gpm = G(q, p - hp);
    const double j11 = (gqp[0] - gqm[0]) / (2 * hq), j21 = (gqp[1] - gqm[1]) / (2 * hq);
    const double j12 = (gpp[0] - gpm[0]) / (2 * hp), j22 = (gpp[1] - gpm[1]) / (2 * hp);
    const double det = j11 * j22 - j12 * j21;
    if (!(std::abs(det) > 0.0) || !std::isfinite(det)) fail(ErrorKind::NoConvergence, "singular Newton Jacobian");
    const double dq = (j22 * g[0] - j12 * g[1]) / det;
    const double dp = (-j21 * g[0] + j11 * g[1]) / det;
    // Backtracking: the map is strongly nonlinear away from the saddle.
    double step = 1.0, next = 0.0;
    std::array<double, 2> trial{};
    for (int half = 0;; ++half) {
      try {
        trial = G(q - step * dq, p - step * dp);
        next = std::hypot(trial[0], trial[1]);
      } catch (const Error&) {
        next = std::numeric_limits<double>::infinity();
      }
      if (next < residual || half == 40) break;
      step *= 0.5;
    }
    if (!std::isfinite(next)) fail(ErrorKind::NoConvergence, "Newton iterate left the finite range");
    q -= step * dq;
    p -= step * dp;
    g = trial;
    // Round-off floor: the step no longer moves the point.
    if (step * std::hypot(dq, dp) < 1e-15 * (1.0 + std::hypot(q, p)) && next >= tol)
      fail(ErrorKind::NoConvergence, "Newton stalled above tolerance");
    residual = next;
  }

  FixedPoint fp;
  fp.location = {q, p, guess.t};
  fp.residual = residual;
  fp.iterations = it;
  fp.monodromy = monodromy(fp.location, s, opt.steps_per_period);
  const Mat2& M = fp.monodromy;
  const double half_tr = 0.5 * M.trace();
  const double disc = half_tr * half_tr - M.det();
  if (disc <= 0.0) fail(ErrorKind::NotHyperbolic, "monodromy eigenvalues are complex (elliptic point)");
  const double r = std::sqrt(disc);
  const double mu1 = half_tr + r, mu2 = half_tr - r;
  const double mu_u = std::abs(mu1) >= std::abs(mu2) ? mu1 : mu2;
  const double mu_s = std::abs(mu1) >= std::abs(mu2) ? mu2 : mu1;
  if (std::abs(std::log(std::abs(mu_u))) < opt.unit_circle_tol)
    fail(ErrorKind::NotHyperbolic, "monodromy eigenvalues on the unit circle");
  fp.mu_unstable = mu_u;
  fp.mu_stable = mu_s;
  fp.lambda = std::log(std::abs(mu_u)) / T;
  fp.unstable_dir = detail::rescaled_unit(detail::eigenvector(M, mu_u), fp.lambda, s.m);
  fp.stable_dir = detail::rescaled_unit(detail::eigenvector(M, mu_s), fp.lambda, s.m);
  return fp;
}

}  // namespace qct
