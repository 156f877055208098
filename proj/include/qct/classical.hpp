#pragma once

// Classical counterparts of the Wigner solver: Langevin trajectory ensembles
// (Euler-Maruyama with counter-based noise) and the Fokker-Planck grid solver,
// which reuses the split-step propagator with the first-order kernel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qct/common.hpp"
#include "qct/grid.hpp"
#include "qct/model.hpp"
#include "qct/rng.hpp"
#include "qct/spectral.hpp"

namespace qct {

struct TrajectoryEnsemble {
  std::vector<double> q, p;
  double t = 0.0;
  std::uint64_t seed = 0;
  /// Euler-Maruyama steps already taken; the next step draws normal(steps).
  std::uint64_t steps = 0;

  std::size_t size() const { return q.size(); }
};

inline TrajectoryEnsemble make_ensemble(const std::vector<PhasePoint>& points, std::uint64_t seed) {
  require(!points.empty(), "ensemble needs at least one trajectory");
  TrajectoryEnsemble e;
  e.seed = seed;
  e.t = points.front().t;
  for (const auto& z : points) {
    require(z.finite(), "ensemble: non-finite initial point");
    e.q.push_back(z.q);
    e.p.push_back(z.p);
  }
  return e;
}

/// n points drawn from the coherent-state Gaussian (substream Sampling).
inline TrajectoryEnsemble sample_coherent_ensemble(const CoherentState& cs, double hbar, std::size_t n,
                                                   std::uint64_t seed, double t0 = 0.0) {
  require(n >= 1, "ensemble needs at least one trajectory");
  TrajectoryEnsemble e;
  e.seed = seed;
  e.t = t0;
  e.q.resize(n);
  e.p.resize(n);
  const double sq = cs.width_q(hbar), sp = cs.width_p(hbar);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = NoiseStream(seed, Stream::Sampling, i).normal_pair(0);
    e.q[i] = cs.q0 + sq * z[0];
    e.p[i] = cs.p0 + sp * z[1];
  }
  return e;
}

/// One Euler-Maruyama step from time `t`; the force and p used for the
/// q-update are both taken before the step. `xi` is a standard normal.
inline PhasePoint step_langevin(PhasePoint z, double dt, const SystemParams& s, double xi) {
  require(dt > 0.0, "step_langevin: dt must be > 0");
  const double f = force(z.q, z.t, s);
  PhasePoint out{z.q + z.p / s.m * dt, z.p + f * dt + std::sqrt(2.0 * s.D * dt) * xi, z.t + dt};
  if (!out.finite()) fail(ErrorKind::NonFiniteState, "Langevin step left the finite range");
  return out;
}

inline PhasePoint step_langevin(PhasePoint z, double dt, const SystemParams& s, const NoiseStream& noise,
                                std::uint64_t counter) {
  return step_langevin(z, dt, s, noise.normal(counter));
}

/// Trajectory i draws its k-th increment from (seed, Ensemble, i) at counter
/// k, so the result does not depend on how trajectories are split.
inline TrajectoryEnsemble evolve_ensemble(TrajectoryEnsemble e, double t_final, double dt, const SystemParams& s,
                                          Stream stream = Stream::Ensemble) {
  s.validate();
  const std::size_t n_steps = steps_for(t_final - e.t, dt);
  if (n_steps == 0) return e;
  const double t0 = e.t, amp = std::sqrt(2.0 * s.D * dt);
  const std::uint64_t k0 = e.steps;
  parallel_for(
      e.size(),
      [&](std::size_t b, std::size_t end) {
        for (std::size_t i = b; i < end; ++i) {
          const NoiseStream noise(e.seed, stream, i);
          double q = e.q[i], p = e.p[i];
          std::array<double, 2> pair{};
          for (std::size_t k = 0; k < n_steps; ++k) {
            const std::uint64_t c = k0 + k;
            if (k == 0 || (c & 1) == 0) pair = noise.normal_pair(c >> 1);
            const double f = force(q, t0 + static_cast<double>(k) * dt, s);
            const double qn = q + p / s.m * dt;
            p += f * dt + amp * pair[c & 1];
            q = qn;
          }
          if (!std::isfinite(q) || !std::isfinite(p)) fail(ErrorKind::NonFiniteState, "trajectory left the finite range");
          e.q[i] = q;
          e.p[i] = p;
        }
      },
      64);
  e.t = t0 + static_cast<double>(n_steps) * dt;
  e.steps = k0 + n_steps;
  return e;
}

struct Bandwidth {
  double q = 0.0, p = 0.0;
};

/// One grid cell in each direction (the default smoothing).
inline Bandwidth cell_bandwidth(const PhaseSpaceGrid& g) { return {g.dq(), g.dp()}; }

namespace detail {

/// Separable Gaussian blur with zero padding; each output line is a
/// fixed-order sum, so the result is reproducible.
inline void gaussian_blur(std::vector<double>& v, std::size_t n_q, std::size_t n_p, double sig_i, double sig_j) {
  auto kernel = [](double sig) {
    std::vector<double> k;
    if (sig <= 0.0) return std::vector<double>{1.0};
    const auto r = static_cast<std::size_t>(std::ceil(4.0 * sig));
    double sum = 0;
    for (std::size_t a = 0; a <= 2 * r; ++a) {
      const double x = static_cast<double>(a) - static_cast<double>(r);
      k.push_back(std::exp(-0.5 * x * x / (sig * sig)));
      sum += k.back();
    }
    for (double& w : k) w /= sum;
    return k;
  };
  const auto ki = kernel(sig_i), kj = kernel(sig_j);
  const long ri = static_cast<long>(ki.size() / 2), rj = static_cast<long>(kj.size() / 2);
  std::vector<double> tmp(v.size(), 0.0);
  for (std::size_t i = 0; i < n_q; ++i)
    for (std::size_t j = 0; j < n_p; ++j) {
      double acc = 0;
      for (long a = -rj; a <= rj; ++a) {
        const long jj = static_cast<long>(j) + a;
        if (jj >= 0 && jj < static_cast<long>(n_p)) acc += kj[static_cast<std::size_t>(a + rj)] * v[i * n_p + static_cast<std::size_t>(jj)];
      }
      tmp[i * n_p + j] = acc;
    }
  for (std::size_t i = 0; i < n_q; ++i)
    for (std::size_t j = 0; j < n_p; ++j) {
      double acc = 0;
      for (long a = -ri; a <= ri; ++a) {
        const long ii = static_cast<long>(i) + a;
        if (ii >= 0 && ii < static_cast<long>(n_q)) acc += ki[static_cast<std::size_t>(a + ri)] * tmp[static_cast<std::size_t>(ii) * n_p + j];
      }
      v[i * n_p + j] = acc;
    }
}

}  // namespace detail

/// Nearest-node histogram normalized to unit mass, optionally blurred with a
/// Gaussian of the given standard deviations (physical units).
inline PhaseSpaceField density_from_ensemble(const TrajectoryEnsemble& e, const PhaseSpaceGrid& g, Bandwidth bw = {}) {
  require(bw.q >= 0.0 && bw.p >= 0.0, "density_from_ensemble: bandwidth must be >= 0");
  std::vector<std::uint64_t> counts(g.size(), 0);
  std::uint64_t inside = 0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    const double x = std::round((e.q[k] - g.q_min) / g.dq());
    const double y = std::round((e.p[k] - g.p_min) / g.dp());
    if (!(x >= 0 && x < static_cast<double>(g.n_q) && y >= 0 && y < static_cast<double>(g.n_p))) continue;
    ++counts[static_cast<std::size_t>(x) * g.n_p + static_cast<std::size_t>(y)];
    ++inside;
  }
  if (inside == 0) fail(ErrorKind::AllPointsOutsideGrid, "no trajectory lies inside the grid");
  PhaseSpaceField f(g, FieldKind::Classical, 0.0, e.t);
  const double w = 1.0 / (static_cast<double>(inside) * g.cell_area());
  for (std::size_t c = 0; c < counts.size(); ++c) f.values[c] = static_cast<double>(counts[c]) * w;
  if (bw.q > 0.0 || bw.p > 0.0) {
    detail::gaussian_blur(f.values, g.n_q, g.n_p, bw.q / g.dq(), bw.p / g.dp());
    normalize(f);
  }
  return f;
}

/// Split-step Fokker-Planck evolution (Liouville + momentum diffusion).
inline EvolveResult evolve_fokker_planck(PhaseSpaceField field, double t_final, double dt, const SystemParams& s,
                                         const EvolveSchedule& schedule = {}) {
  if (field.kind != FieldKind::Classical) fail(ErrorKind::InvalidArgument, "evolve_fokker_planck: expected a classical field");
  return detail::evolve_split_step(std::move(field), t_final, dt, s, KernelKind::Classical, schedule);
}

// ---------------------------------------------------------------------------
// Ensemble dump

inline std::string ensemble_csv(const TrajectoryEnsemble& e) {
  std::string out = "q,p\n";
  for (std::size_t i = 0; i < e.size(); ++i) out += format_double(e.q[i]) + "," + format_double(e.p[i]) + "\n";
  return out;
}

}  // namespace qct
