#pragma once

// Strang-split spectral propagator for phase-space densities,
//
//   d_t f = -(p/m) d_q f + [potential term] f + D d_p^2 f,
//
// shared by the Wigner and classical Fokker-Planck solvers. Free streaming is
// an exact phase in the (k_q, p) representation. The potential and diffusion
// act multiplicatively in the (q, X) representation, X being Fourier-conjugate
// to p through exp(i p X / hbar):
//
//   Moyal:     exp(-i dt/hbar [V(q + X/2) - V(q - X/2)]) exp(-D X^2 dt / hbar^2)
//   Classical: exp(-i dt/hbar  X V'(q))                  exp(-D X^2 dt / hbar^2)
//
// For a quartic V the two-point difference is exactly X V' + X^3 V'''/24, i.e.
// the classical Liouville term plus the whole (terminating) quantum series,
// which is how the Moyal table is evaluated.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "qct/common.hpp"
#include "qct/fft.hpp"
#include "qct/grid.hpp"
#include "qct/model.hpp"

namespace qct {

enum class KernelKind { Moyal, Classical };

namespace detail {
inline std::complex<double> cmul(std::complex<double> a, std::complex<double> b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}
inline std::complex<double> expi(double phase) { return {std::cos(phase), std::sin(phase)}; }
}  // namespace detail

class SplitStepPropagator {
 public:
  SplitStepPropagator(const PhaseSpaceGrid& g, const SystemParams& s, double dt, KernelKind kind)
      : grid_(g), sys_(s), dt_(dt), kind_(kind) {
    s.validate();
    require(dt > 0.0 && std::isfinite(dt), "propagator: dt must be > 0");
    nq_ = g.n_q;
    np_ = g.n_p;
    nkq_ = nq_ / 2 + 1;
    nkp_ = np_ / 2 + 1;
    ckp_ = nkp_ + (nkp_ % 2);  // pad complex rows to keep 32-byte alignment between rows
    block_q_ = std::min<std::size_t>(16, np_);
    block_p_ = std::min<std::size_t>(16, nq_);
    buf_ = fft::RealBuffer(nq_ * np_);
    work_ = fft::ComplexBuffer(std::max(nkq_ * np_, nq_ * ckp_));

    const int nq = static_cast<int>(nq_), np = static_cast<int>(np_), ckp = static_cast<int>(ckp_);
    q_fwd_ = fft::plan_r2c(nq, static_cast<int>(block_q_), buf_.data(), np, 1, work_.data(), np, 1);
    q_inv_ = fft::plan_c2r(nq, static_cast<int>(block_q_), work_.data(), np, 1, buf_.data(), np, 1);
    p_fwd_ = fft::plan_r2c(np, static_cast<int>(block_p_), buf_.data(), 1, np, work_.data(), 1, ckp);
    p_inv_ = fft::plan_c2r(np, static_cast<int>(block_p_), work_.data(), 1, ckp, buf_.data(), 1, np);

    build_stream_table(half_stream_, 0.5 * dt);
    build_stream_table(full_stream_, dt);
    build_kick_table();
  }

  SplitStepPropagator(const SplitStepPropagator&) = delete;
  SplitStepPropagator& operator=(const SplitStepPropagator&) = delete;

  double dt() const { return dt_; }
  const PhaseSpaceGrid& grid() const { return grid_; }
  KernelKind kind() const { return kind_; }

  /// X value carried by r2c output index k along p (FFTW's forward sign).
  double x_of(std::size_t k) const {
    return -2.0 * pi * sys_.hbar * static_cast<double>(k) / (grid_.p_max - grid_.p_min);
  }

  /// n Strang steps from f.t; consecutive half-streams are fused.
  void advance(PhaseSpaceField& f, std::size_t n) {
    require(f.grid == grid_, "propagator: field grid differs from propagator grid");
    if (n == 0) return;
    std::copy(f.values.begin(), f.values.end(), buf_.data());
    stream(half_stream_);
    for (std::size_t s = 0; s < n; ++s) {
      kick(f.t + (static_cast<double>(s) + 0.5) * dt_);
      stream(s + 1 == n ? half_stream_ : full_stream_);
    }
    std::copy(buf_.data(), buf_.data() + f.values.size(), f.values.begin());
    f.t += static_cast<double>(n) * dt_;
  }

 private:
  void build_stream_table(std::vector<std::complex<double>>& table, double tau) {
    table.assign(nkq_ * np_, {});
    const double lq = grid_.q_max - grid_.q_min;
    const double inv_n = 1.0 / static_cast<double>(nq_);
    for (std::size_t k = 0; k < nkq_; ++k) {
      const double kq = 2.0 * pi * static_cast<double>(k) / lq;
      for (std::size_t j = 0; j < np_; ++j) {
        const double theta = kq * grid_.p(j) * tau / sys_.m;
        auto e = detail::expi(-theta);
        if (2 * k == nq_) e = {e.real(), 0.0};  // Nyquist coefficient of real data stays real
        table[k * np_ + j] = e * inv_n;
      }
    }
  }

  void build_kick_table() {
    kick_.assign(nq_ * ckp_, {});
    xs_.resize(nkp_);
    for (std::size_t k = 0; k < nkp_; ++k) xs_[k] = x_of(k);
    const double inv_n = 1.0 / static_cast<double>(np_);
    const double c = dt_ / sys_.hbar;
    for (std::size_t i = 0; i < nq_; ++i) {
      const double q = grid_.q(i);
      const double g0 = static_gradient(q, sys_);
      const double g3 = potential_derivatives(q, 0.0, sys_).d3V;
      for (std::size_t k = 0; k < nkp_; ++k) {
        const double x = xs_[k];
        double dv = x * g0;
        if (kind_ == KernelKind::Moyal) dv += x * x * x * (g3 / 24.0);
        const double damp = std::exp(-sys_.k_env() * x * x * dt_);
        kick_[i * ckp_ + k] = detail::expi(-c * dv) * (damp * inv_n);
      }
    }
  }

  void stream(const std::vector<std::complex<double>>& table) {
    const std::size_t blocks = np_ / block_q_;
    parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
      for (std::size_t b = b0; b < b1; ++b) {
        const std::size_t j0 = b * block_q_;
        fft::execute_r2c(q_fwd_, buf_.data() + j0, work_.data() + j0);
        for (std::size_t k = 0; k < nkq_; ++k) {
          std::complex<double>* row = work_.data() + k * np_ + j0;
          const std::complex<double>* tab = table.data() + k * np_ + j0;
          for (std::size_t j = 0; j < block_q_; ++j) row[j] = detail::cmul(row[j], tab[j]);
        }
        fft::execute_c2r(q_inv_, work_.data() + j0, buf_.data() + j0);
      }
    });
  }

  void kick(double t_mid) {
    std::vector<std::complex<double>> drive_phase(nkp_);
    const double c = dt_ / sys_.hbar * drive(t_mid, sys_);
    for (std::size_t k = 0; k < nkp_; ++k) drive_phase[k] = detail::expi(-c * xs_[k]);
    const std::size_t blocks = nq_ / block_p_;
    const std::size_t nyq = np_ / 2;
    parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
      for (std::size_t b = b0; b < b1; ++b) {
        const std::size_t i0 = b * block_p_;
        fft::execute_r2c(p_fwd_, buf_.data() + i0 * np_, work_.data() + i0 * ckp_);
        for (std::size_t i = i0; i < i0 + block_p_; ++i) {
          std::complex<double>* row = work_.data() + i * ckp_;
          const std::complex<double>* tab = kick_.data() + i * ckp_;
          for (std::size_t k = 0; k < nyq; ++k) row[k] = detail::cmul(row[k], detail::cmul(tab[k], drive_phase[k]));
          row[nyq] *= detail::cmul(tab[nyq], drive_phase[nyq]).real();
        }
        fft::execute_c2r(p_inv_, work_.data() + i0 * ckp_, buf_.data() + i0 * np_);
      }
    });
  }

  PhaseSpaceGrid grid_;
  SystemParams sys_;
  double dt_;
  KernelKind kind_;
  std::size_t nq_ = 0, np_ = 0, nkq_ = 0, nkp_ = 0, ckp_ = 0, block_q_ = 0, block_p_ = 0;
  fft::RealBuffer buf_;
  fft::ComplexBuffer work_;
  fft::Plan q_fwd_, q_inv_, p_fwd_, p_inv_;
  std::vector<std::complex<double>> half_stream_, full_stream_, kick_;
  std::vector<double> xs_;
};

struct EvolveSchedule {
  /// Record diagnostics every this many steps (0: only at the start and end).
  std::size_t diagnostics_every = 0;
  /// Absolute times at which full field copies are kept; must lie on the dt lattice.
  std::vector<double> snapshot_times;
  /// BoundaryMassExceeded is raised when mass in the two outermost cells exceeds this.
  double boundary_cap = 1e-6;
};

struct EvolveResult {
  PhaseSpaceField final;
  std::vector<Diagnostics> series;
  std::vector<PhaseSpaceField> snapshots;
};

/// Number of dt steps spanning `span`; dt must divide it.
inline std::size_t steps_for(double span, double dt) {
  require(dt > 0.0, "dt must be > 0");
  require(span >= 0.0, "final time precedes the current time");
  const double n = std::round(span / dt);
  if (std::abs(n * dt - span) > 1e-9 * std::max(1.0, span)) fail(ErrorKind::InvalidArgument, "dt does not divide the interval");
  return static_cast<std::size_t>(n);
}

namespace detail {

inline void check_field(const PhaseSpaceField& f, const Diagnostics& d, double cap) {
  if (!all_finite(f)) fail(ErrorKind::NonFiniteField, "field overflowed (dt too large?)");
  if (d.boundary_mass > cap)
    fail(ErrorKind::BoundaryMassExceeded, "boundary mass " + format_double(d.boundary_mass) + " exceeds cap");
}

inline EvolveResult evolve_split_step(PhaseSpaceField field, double t_final, double dt, const SystemParams& s,
                                      KernelKind kind, const EvolveSchedule& sched) {
  const std::size_t n = steps_for(t_final - field.t, dt);
  EvolveResult out;
  out.series.push_back(diagnostics(field));
  if (n == 0) {
    for (double ts : sched.snapshot_times) {
      if (std::abs(ts - field.t) > 1e-9 * std::max(1.0, std::abs(ts)))
        fail(ErrorKind::InvalidArgument, "snapshot time outside the run");
      out.snapshots.push_back(field);
    }
    out.final = std::move(field);
    return out;
  }
  std::vector<std::size_t> stops;
  if (sched.diagnostics_every > 0)
    for (std::size_t k = sched.diagnostics_every; k < n; k += sched.diagnostics_every) stops.push_back(k);
  std::vector<std::size_t> snap_steps;
  for (double ts : sched.snapshot_times) {
    const std::size_t k = steps_for(ts - field.t, dt);
    if (k > n) fail(ErrorKind::InvalidArgument, "snapshot time beyond t_final");
    snap_steps.push_back(k);
    stops.push_back(k);
  }
  stops.push_back(n);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

  SplitStepPropagator prop(field.grid, s, dt, kind);
  const double t0 = field.t;
  std::size_t done = 0;
  for (std::size_t stop : stops) {
    if (stop > done) prop.advance(field, stop - done);
    // Re-anchor the clock on the lattice so long runs do not accumulate drift.
    field.t = t0 + static_cast<double>(stop) * dt;
    done = stop;
    const Diagnostics d = diagnostics(field);
    check_field(field, d, sched.boundary_cap);
    const bool on_diag = sched.diagnostics_every > 0 && stop % sched.diagnostics_every == 0;
    if (stop > 0 && (on_diag || stop == n)) out.series.push_back(d);
    for (std::size_t k : snap_steps)
      if (k == stop) out.snapshots.push_back(field);
  }
  out.final = std::move(field);
  return out;
}

}  // namespace detail

}  // namespace qct
