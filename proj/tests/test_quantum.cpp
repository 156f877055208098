#include <gtest/gtest.h>

#include <cmath>

#include "qct/classical.hpp"
#include "qct/compare.hpp"
#include "qct/quantum.hpp"

using namespace qct;

namespace {

double sup_diff(const PhaseSpaceField& a, const PhaseSpaceField& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

// Grid commensurate with an n_x-point density matrix on [-5.25, 5.25]: X spacing = dx.
PhaseSpaceGrid oracle_grid(std::size_t n_x, std::size_t n) {
  const double lq = 10.5, dx = lq / static_cast<double>(n_x), lp = 2 * pi * 0.1 / dx;
  return init_grid(-0.5 * lq, 0.5 * lq, -0.5 * lp, 0.5 * lp, n, n);
}

}  // namespace

TEST(Wigner, ZeroStepsIsIdentity) {
  const auto g = init_grid(-5, 5, -10, 10, 64, 64);
  const auto f = init_coherent_state(g, {}, 0.1);
  const auto r = evolve_wigner(f, f.t, 0.01, SystemParams::duffing_paper(0.01));
  EXPECT_EQ(r.final.values, f.values);
  ASSERT_EQ(r.series.size(), 1u);
}

TEST(Wigner, RejectsClassicalField) {
  const auto g = init_grid(-5, 5, -10, 10, 64, 64);
  const auto f = init_coherent_state(g, {}, 0.1, FieldKind::Classical);
  EXPECT_THROW(evolve_wigner(f, 0.1, 0.01, SystemParams::duffing_paper()), Error);
}

TEST(Wigner, HarmonicKernelsCoincide) {
  const auto g = init_grid(-4, 4, -6, 6, 256, 128);
  for (double D : {0.0, 1e-2}) {
    const auto s = SystemParams::harmonic(4.0, 0.1, D);
    const double T = s.period();
    auto w = init_coherent_state(g, {1.0, 0.5, 0.0}, 0.1);
    auto c = w;
    c.kind = FieldKind::Classical;
    for (int k = 0; k < 3; ++k) {
      w = evolve_wigner(w, w.t + T, T / 500, s).final;
      c = evolve_fokker_planck(c, c.t + T, T / 500, s).final;
      EXPECT_LT(sup_diff(w, c), 1e-10) << "D=" << D << " period " << k;
    }
  }
}

TEST(Wigner, HarmonicClosedSystemKeepsPurity) {
  const auto g = init_grid(-4, 4, -6, 6, 512, 256);
  const auto s = SystemParams::harmonic(4.0, 0.1, 0.0);
  auto w = init_coherent_state(g, {1.5, 0.0, 0.3}, 0.1);  // squeezed: variances oscillate
  const auto d0 = diagnostics(w);
  const double w0 = 2.0;  // sqrt(k / m)
  EvolveSchedule sch;
  sch.diagnostics_every = 50;
  const auto r = evolve_wigner(w, 2.0, 2e-3, s, sch);
  for (const auto& d : r.series) {
    EXPECT_NEAR(d.purity, d0.purity, 1e-6);
    // Exact squeezed-state variance, up to the O((w0 dt)^2) splitting error.
    const double c = std::cos(w0 * d.t), sn = std::sin(w0 * d.t);
    EXPECT_NEAR(d.var_q, d0.var_q * c * c + d0.var_p * sn * sn / (w0 * w0), 1e-5);
  }
}

TEST(Wigner, FreeDiffusionLaw) {
  const auto g = init_grid(-20, 20, -6, 6, 256, 128);
  const double D = 1e-2, t = 10.0;
  const auto s = SystemParams::free_particle(0.1, D);
  const auto f = init_coherent_state(g, {0.0, 0.0, 0.0}, 0.1);
  EvolveSchedule sch;
  sch.boundary_cap = 1.0;  // the q spread wraps; only the p marginal is checked
  const auto r = evolve_wigner(f, t, 0.01, s, sch);
  const double growth = r.series.back().var_p - r.series.front().var_p;
  EXPECT_NEAR(growth, 2 * D * t, 1e-6);
  EXPECT_NEAR(r.series.back().norm, 1.0, 1e-12);
}

TEST(Wigner, NormConservedOnBenchmark) {
  const auto g = init_grid(-8, 8, -16, 16, 128, 128);
  const auto s = SystemParams::duffing_paper(1e-3);
  const auto f = init_coherent_state(g, {}, 0.1);
  EvolveSchedule sch;
  sch.boundary_cap = 1.0;
  const auto r = evolve_wigner(f, s.period() / 4, s.period() / 2000, s, sch);
  EXPECT_NEAR(r.series.back().norm, 1.0, 1e-10);
}

TEST(Wigner, NegativityOrderedByNoise) {
  const auto g = init_grid(-8, 8, -16, 16, 128, 128);
  const auto f = init_coherent_state(g, {}, 0.1);
  EvolveSchedule sch;
  sch.boundary_cap = 1.0;
  double neg[2];
  int k = 0;
  for (double D : {1e-5, 1e-1}) {
    const auto s = SystemParams::duffing_paper(D);
    neg[k++] = evolve_wigner(f, s.period() / 4, s.period() / 2000, s, sch).series.back().negativity_volume;
  }
  EXPECT_GT(neg[0], neg[1]);
}

TEST(Wigner, SnapshotsOnLattice) {
  const auto g = init_grid(-5, 5, -10, 10, 64, 64);
  const auto s = SystemParams::duffing_paper(1e-2);
  const auto f = init_coherent_state(g, {}, 0.1);
  EvolveSchedule sch;
  sch.snapshot_times = {0.02, 0.05};
  sch.boundary_cap = 1.0;
  const auto r = evolve_wigner(f, 0.05, 0.001, s, sch);
  ASSERT_EQ(r.snapshots.size(), 2u);
  EXPECT_NEAR(r.snapshots[0].t, 0.02, 1e-15);
  EXPECT_EQ(r.snapshots[1].values, r.final.values);
  sch.snapshot_times = {0.0205};
  EXPECT_THROW(evolve_wigner(f, 0.05, 0.001, s, sch), Error);
}

TEST(Wigner, BoundaryTripwire) {
  const auto g = init_grid(-3, 3, -4, 4, 64, 64);
  const auto s = SystemParams::duffing_paper();
  const auto f = init_coherent_state(g, {1.0, 0.0, 0.0}, 0.1);
  try {
    evolve_wigner(f, 1.0, 0.001, s);
    FAIL() << "expected BoundaryMassExceeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BoundaryMassExceeded);
  }
}

TEST(Oracle, TransformOfInitialState) {
  const auto g = oracle_grid(256, 128);
  const auto dm = coherent_density_matrix({}, g.q_min, g.q_max - g.q_min, 256, 0.1);
  EXPECT_NEAR(dm.trace().real(), 1.0, 1e-12);
  const auto w = wigner_transform(dm, g, 0.1);
  EXPECT_LT(l1_distance(w, init_coherent_state(g, {}, 0.1)), 1e-6);
}

TEST(Oracle, TransformHalfSpacing) {
  // X spacing of 2 dx: every coherence sits on a node.
  const double lq = 10.5, dx = lq / 256;
  const double lp = 2 * pi * 0.1 / (2 * dx);
  const auto g = init_grid(-5.25, 5.25, -0.5 * lp, 0.5 * lp, 128, 64);
  const auto dm = coherent_density_matrix({0.5, 0.3, 0.0}, g.q_min, lq, 256, 0.1);
  const auto w = wigner_transform(dm, g, 0.1);
  EXPECT_LT(l1_distance(w, init_coherent_state(g, {0.5, 0.3, 0.0}, 0.1)), 1e-6);
}

TEST(Oracle, IncompatibleGrid) {
  const auto dm = coherent_density_matrix({}, -5.25, 10.5, 256, 0.1);
  try {
    wigner_transform(dm, init_grid(-5.25, 5.25, -7, 7, 128, 128), 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IncompatibleGrid);
  }
}

TEST(Oracle, TracePreservedAndHermitian) {
  const auto g = oracle_grid(128, 64);
  const auto s = SystemParams::duffing_paper(1e-2);
  const auto r = dm_oracle({}, g, 0.0, 0.1, s, 128);
  EXPECT_LT(r.max_trace_error, 1e-8);
  EXPECT_LT(r.hermiticity_error, 1e-12);
  EXPECT_GT(r.steps, 0u);
}

TEST(Oracle, DecoherenceLowersPurity) {
  const auto g = oracle_grid(128, 64);
  auto pure = SystemParams::duffing_paper(0.0);
  auto noisy = SystemParams::duffing_paper(0.1);
  const double p0 = diagnostics(dm_oracle({}, g, 0.0, 0.1, pure, 128).wigner).purity;
  const double p1 = diagnostics(dm_oracle({}, g, 0.0, 0.1, noisy, 128).wigner).purity;
  EXPECT_NEAR(p0, 1 / (2 * pi * 0.1), 1e-4);
  EXPECT_LT(p1, p0 * 0.999);
}

// The two solvers share no numerics; agreement while the state is resolved.
TEST(Oracle, AgreesWithGridPropagatorOverEighthPeriod) {
  const auto g = oracle_grid(256, 128);
  const auto s = SystemParams::duffing_paper(1e-3);
  const double T = s.period();
  const auto f = init_coherent_state(g, {}, 0.1);
  EvolveSchedule sch;
  sch.boundary_cap = 1e-6;
  const auto grid = evolve_wigner(f, T / 8, T / 2000, s, sch);
  const auto oracle = dm_oracle({}, g, 0.0, T / 8, s, 256);
  EXPECT_LT(l1_distance(grid.final, oracle.wigner), 1e-3);
}
