#pragma once

// Open-system quantum evolution. The production path propagates the Wigner
// function on the phase-space grid; dm_oracle integrates the position-space
// density matrix of the same Lindblad equation with RK4 and Wigner-transforms
// the result, sharing no numerical machinery with the grid propagator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "qct/common.hpp"
#include "qct/fft.hpp"
#include "qct/grid.hpp"
#include "qct/model.hpp"
#include "qct/spectral.hpp"

namespace qct {

inline void require_kind(const PhaseSpaceField& f, FieldKind kind, const char* who) {
  if (f.kind != kind)
    fail(ErrorKind::InvalidArgument,
         std::string(who) + ": expected a " + (kind == FieldKind::Wigner ? "wigner" : "classical") + " field");
}

/// One Strang step: half streaming, exact two-point potential + diffusion
/// kernel at the midpoint time, half streaming.
inline PhaseSpaceField step_wigner(PhaseSpaceField field, double dt, const SystemParams& s,
                                   double boundary_cap = 1e-6) {
  require_kind(field, FieldKind::Wigner, "step_wigner");
  SplitStepPropagator prop(field.grid, s, dt, KernelKind::Moyal);
  prop.advance(field, 1);
  detail::check_field(field, diagnostics(field), boundary_cap);
  return field;
}

inline EvolveResult evolve_wigner(PhaseSpaceField field, double t_final, double dt, const SystemParams& s,
                                  const EvolveSchedule& schedule = {}) {
  require_kind(field, FieldKind::Wigner, "evolve_wigner");
  return detail::evolve_split_step(std::move(field), t_final, dt, s, KernelKind::Moyal, schedule);
}

// ---------------------------------------------------------------------------
// Density-matrix oracle

struct DensityMatrix {
  std::size_t n = 0;
  double x_min = 0.0;
  double dx = 0.0;
  double t = 0.0;
  std::vector<std::complex<double>> rho;  // rho[i * n + j] = rho(x_i, x_j)

  double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx; }
  std::complex<double> trace() const {
    std::complex<double> s = 0;
    for (std::size_t i = 0; i < n; ++i) s += rho[i * n + i];
    return s * dx;
  }
  /// max |rho - rho^dagger| in matrix (dx-weighted) units.
  double hermiticity_error() const {
    double e = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) e = std::max(e, std::abs(rho[i * n + j] - std::conj(rho[j * n + i])));
    return e * dx;
  }
};

inline DensityMatrix coherent_density_matrix(const CoherentState& cs, double x_min, double length, std::size_t n,
                                             double hbar) {
  DensityMatrix dm;
  dm.n = n;
  dm.x_min = x_min;
  dm.dx = length / static_cast<double>(n);
  const double sq = cs.width_q(hbar);
  std::vector<std::complex<double>> psi(n);
  double norm = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = dm.x(i);
    const double a = (x - cs.q0) / sq;
    psi[i] = std::polar(std::exp(-0.25 * a * a), cs.p0 * x / hbar);
    norm += std::norm(psi[i]);
  }
  norm *= dm.dx;
  dm.rho.resize(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dm.rho[i * n + j] = psi[i] * std::conj(psi[j]) / norm;
  return dm;
}

struct OracleOptions {
  /// RK4 steps; 0 picks dt from the spectral radius bound below.
  std::size_t n_steps = 0;
  /// dt * (largest generator frequency on the grid) when n_steps = 0.
  double stability_fraction = 0.5;
  double hermiticity_tol = 1e-8;
};

struct OracleResult {
  PhaseSpaceField wigner;
  DensityMatrix rho;
  std::size_t steps = 0;
  double max_trace_error = 0.0;
  double hermiticity_error = 0.0;
};

namespace detail {

class LindbladRhs {
 public:
  LindbladRhs(std::size_t n, double dx, double x_min, const SystemParams& s)
      : n_(n), dx_(dx), x_min_(x_min), sys_(s), buf_(n * n) {
    const int ni = static_cast<int>(n);
    row_fwd_ = fft::plan_c2c(ni, ni, buf_.data(), 1, ni, buf_.data(), 1, ni, FFTW_FORWARD);
    row_inv_ = fft::plan_c2c(ni, ni, buf_.data(), 1, ni, buf_.data(), 1, ni, FFTW_BACKWARD);
    kinetic_.resize(n);
    const double length = dx * static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double kk = static_cast<double>(k <= n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n));
      const double wave = 2.0 * pi * kk / length;
      kinetic_[k] = s.hbar * s.hbar * wave * wave / (2.0 * s.m) / static_cast<double>(n);
    }
  }

  /// Largest |eigenvalue| of the generator on this grid (upper bound).
  double spectral_radius() const {
    double vmin = 1e300, vmax = -1e300;
    for (std::size_t i = 0; i < n_; ++i) {
      const double x = x_min_ + static_cast<double>(i) * dx_;
      const double v = potential_derivatives(x, 0.0, sys_).V;
      const double drive_span = std::abs(sys_.Lambda * x);
      vmin = std::min(vmin, v - drive_span);
      vmax = std::max(vmax, v + drive_span);
    }
    const double kin = *std::max_element(kinetic_.begin(), kinetic_.end()) * static_cast<double>(n_);
    const double length = dx_ * static_cast<double>(n_);
    return (kin + (vmax - vmin)) / sys_.hbar + sys_.k_env() * length * length;
  }

  /// out = L(in) at time t. The commutator with the kinetic term uses
  /// rho K = (K rho)^dagger, valid for the Hermitian states RK4 produces.
  void apply(const std::vector<std::complex<double>>& in, std::vector<std::complex<double>>& out, double t) {
    std::copy(in.begin(), in.end(), buf_.data());
    fft::execute_c2c(row_fwd_, buf_.data(), buf_.data());
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t k = 0; k < n_; ++k) buf_[i * n_ + k] *= kinetic_[k];
    fft::execute_c2c(row_inv_, buf_.data(), buf_.data());
    // buf = rho K
    std::vector<double> v(n_), x(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      x[i] = x_min_ + static_cast<double>(i) * dx_;
      v[i] = potential_derivatives(x[i], t, sys_).V;
    }
    const double inv_h = 1.0 / sys_.hbar, k_env = sys_.k_env();
    const std::complex<double> minus_i(0.0, -1.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        const std::complex<double> rho_k = buf_[i * n_ + j];
        const std::complex<double> k_rho = std::conj(buf_[j * n_ + i]);
        const double d = x[i] - x[j];
        const std::complex<double> diag(-k_env * d * d, -(v[i] - v[j]) * inv_h);
        out[i * n_ + j] = minus_i * inv_h * (k_rho - rho_k) + diag * in[i * n_ + j];
      }
    }
  }

 private:
  std::size_t n_;
  double dx_, x_min_;
  SystemParams sys_;
  fft::ComplexBuffer buf_;
  fft::Plan row_fwd_, row_inv_;
  std::vector<double> kinetic_;
};

}  // namespace detail

/// Integrates d rho/dt = -(i/hbar)[H, rho] - k_env [x, [x, rho]] with classic RK4.
inline void evolve_density_matrix(DensityMatrix& dm, double t_final, const SystemParams& s, const OracleOptions& opt,
                                  std::size_t* steps_taken = nullptr, double* max_trace_error = nullptr) {
  s.validate();
  require(t_final >= dm.t, "evolve_density_matrix: t_final precedes current time");
  detail::LindbladRhs rhs(dm.n, dm.dx, dm.x_min, s);
  const double span = t_final - dm.t;
  std::size_t steps = opt.n_steps;
  if (steps == 0 && span > 0) steps = static_cast<std::size_t>(std::ceil(span * rhs.spectral_radius() / opt.stability_fraction));
  double trace_err = std::abs(dm.trace() - 1.0);
  if (steps > 0) {
    const double h = span / static_cast<double>(steps);
    const std::size_t nn = dm.n * dm.n;
    std::vector<std::complex<double>> k(nn), acc(nn), tmp(nn);
    auto& rho = dm.rho;
    const double t0 = dm.t;
    for (std::size_t step = 0; step < steps; ++step) {
      const double t = t0 + static_cast<double>(step) * h;
      acc = rho;
      rhs.apply(rho, k, t);
      for (std::size_t a = 0; a < nn; ++a) {
        acc[a] += (h / 6.0) * k[a];
        tmp[a] = rho[a] + (0.5 * h) * k[a];
      }
      rhs.apply(tmp, k, t + 0.5 * h);
      for (std::size_t a = 0; a < nn; ++a) {
        acc[a] += (h / 3.0) * k[a];
        tmp[a] = rho[a] + (0.5 * h) * k[a];
      }
      rhs.apply(tmp, k, t + 0.5 * h);
      for (std::size_t a = 0; a < nn; ++a) {
        acc[a] += (h / 3.0) * k[a];
        tmp[a] = rho[a] + h * k[a];
      }
      rhs.apply(tmp, k, t + h);
      for (std::size_t a = 0; a < nn; ++a) rho[a] = acc[a] + (h / 6.0) * k[a];
      const std::complex<double> tr = dm.trace();
      if (!std::isfinite(tr.real()) || !std::isfinite(tr.imag()))
        fail(ErrorKind::NonFiniteField, "density matrix overflowed (dt too large?)");
      trace_err = std::max(trace_err, std::abs(tr - 1.0));
    }
    dm.t = t_final;
  }
  if (steps_taken) *steps_taken = steps;
  if (max_trace_error) *max_trace_error = trace_err;
}

/// Wigner transform of rho sampled onto `out`. The grids must be commensurate:
/// out.q nodes on x nodes (same q_min, n_x a multiple of n_q) and the
/// X spacing 2 pi hbar / (p_max - p_min) equal to dx or 2 dx. Odd multiples
/// of dx/2 are reached through a spectral half-cell shift of rho.
inline PhaseSpaceField wigner_transform(const DensityMatrix& dm, const PhaseSpaceGrid& out, double hbar) {
  const std::size_t n = dm.n;
  if (std::abs(out.q_min - dm.x_min) > 1e-12 * std::max(1.0, std::abs(out.q_min)) || n % out.n_q != 0 ||
      std::abs((out.q_max - out.q_min) - dm.dx * static_cast<double>(n)) > 1e-9)
    fail(ErrorKind::IncompatibleGrid, "output q grid is not a subsampling of the density-matrix grid");
  const std::size_t r = n / out.n_q;
  const double dX = 2.0 * pi * hbar / (out.p_max - out.p_min);
  const double ratio = dX / dm.dx;
  int sfac = 0;
  if (std::abs(ratio - 1.0) < 1e-9) sfac = 1;
  else if (std::abs(ratio - 2.0) < 1e-9) sfac = 2;
  else fail(ErrorKind::IncompatibleGrid, "X spacing must equal dx or 2 dx");

  std::vector<std::complex<double>> shifted;
  if (sfac == 1) {
    // rho_h(x, x') = rho(x + dx/2, x' + dx/2)
    fft::ComplexBuffer b(n * n);
    std::copy(dm.rho.begin(), dm.rho.end(), b.data());
    const int ni = static_cast<int>(n);
    auto fwd = fft::plan_c2c(ni, ni, b.data(), 1, ni, b.data(), 1, ni, FFTW_FORWARD);
    auto inv = fft::plan_c2c(ni, ni, b.data(), 1, ni, b.data(), 1, ni, FFTW_BACKWARD);
    auto fwd_c = fft::plan_c2c(ni, ni, b.data(), ni, 1, b.data(), ni, 1, FFTW_FORWARD);
    auto inv_c = fft::plan_c2c(ni, ni, b.data(), ni, 1, b.data(), ni, 1, FFTW_BACKWARD);
    fft::execute_c2c(fwd, b.data(), b.data());
    fft::execute_c2c(fwd_c, b.data(), b.data());
    std::vector<std::complex<double>> ph(n);
    for (std::size_t k = 0; k < n; ++k) {
      const long kk = k < n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
      ph[k] = (2 * k == n) ? std::complex<double>(0.0) : std::polar(1.0, pi * static_cast<double>(kk) / static_cast<double>(n));
    }
    const double scale = 1.0 / static_cast<double>(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) b[i * n + j] *= ph[i] * ph[j] * scale;
    fft::execute_c2c(inv, b.data(), b.data());
    fft::execute_c2c(inv_c, b.data(), b.data());
    shifted.assign(b.data(), b.data() + n * n);
  }

  PhaseSpaceField w(out, FieldKind::Wigner, hbar, dm.t);
  const std::size_t np = out.n_p;
  fft::ComplexBuffer line(np);
  const int npi = static_cast<int>(np);
  auto plan = fft::plan_c2c(npi, 1, line.data(), 1, npi, line.data(), 1, npi, FFTW_FORWARD);
  const long nl = static_cast<long>(n);
  // Coherences reaching past the box are zero (the state is interior).
  auto elem = [&](const std::vector<std::complex<double>>& m, long i, long j) {
    if (i < 0 || j < 0 || i >= nl || j >= nl) return std::complex<double>(0.0);
    return m[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)];
  };
  const double pref = dX / (2.0 * pi * hbar);
  const long half = static_cast<long>(np / 2);
  for (std::size_t a = 0; a < out.n_q; ++a) {
    const long c = static_cast<long>(a * r);
    for (long k = -half; k < half; ++k) {
      std::complex<double> g;
      if (sfac == 2) {
        g = elem(dm.rho, c + k, c - k);
      } else if (k % 2 == 0) {
        g = elem(dm.rho, c + k / 2, c - k / 2);
      } else {
        const long km = (k - 1) / 2;  // exact: k - 1 is even
        g = elem(shifted, c + km, c - km - 1);
      }
      const double X = static_cast<double>(k) * dX;
      line[static_cast<std::size_t>((k + static_cast<long>(np)) % static_cast<long>(np))] =
          g * std::polar(1.0, -out.p_min * X / hbar);
    }
    fft::execute_c2c(plan, line.data(), line.data());
    for (std::size_t j = 0; j < np; ++j) w.at(a, j) = pref * line[j].real();
  }
  return w;
}

/// Reference solution for a coherent initial state: RK4 on the n_x^2 density
/// matrix spanning out.q extents, then the Wigner transform onto `out`.
inline OracleResult dm_oracle(const CoherentState& cs, const PhaseSpaceGrid& out, double t0, double t_final,
                              const SystemParams& s, std::size_t n_x, const OracleOptions& opt = {}) {
  require(n_x >= 16 && n_x <= 512, "dm_oracle: n_x must lie in [16, 512]");
  OracleResult res;
  res.rho = coherent_density_matrix(cs, out.q_min, out.q_max - out.q_min, n_x, s.hbar);
  res.rho.t = t0;
  evolve_density_matrix(res.rho, t_final, s, opt, &res.steps, &res.max_trace_error);
  res.hermiticity_error = res.rho.hermiticity_error();
  if (res.hermiticity_error > opt.hermiticity_tol)
    fail(ErrorKind::HermiticityLost, "||rho - rho^dagger|| = " + format_double(res.hermiticity_error));
  res.wigner = wigner_transform(res.rho, out, s.hbar);
  return res;
}

}  // namespace qct
