#include <gtest/gtest.h>

#include <cmath>

#include "qct/hyperbolic.hpp"

using namespace qct;

namespace {

SystemParams undriven(double D) {
  auto s = SystemParams::duffing_paper(D);
  s.Lambda = 0.0;
  return s;
}

}  // namespace

TEST(Frame, ProjectionIsOrthonormal) {
  const auto f = make_frame(2.0, 3.0, 0.5, -0.25);
  EXPECT_DOUBLE_EQ(f.u_plus(0.5, -0.25), 0.0);
  // (dq, dp) along the unstable eigenvector (1, m lambda) has no u_minus part
  EXPECT_NEAR(f.u_minus(0.5 + 0.1, -0.25 + 0.1 * 6.0), 0.0, 1e-15);
  const double r = std::sqrt(6.0);
  const double qp = r * 0.3, pp = -0.2 / r;
  const double up = f.u_plus(0.8, -0.45), um = f.u_minus(0.8, -0.45);
  EXPECT_NEAR(up * up + um * um, qp * qp + pp * pp, 1e-14);
  EXPECT_THROW(make_frame(0.0, 1.0), Error);
}

TEST(Cumulants, BenchmarkValues) {
  const double lam = std::sqrt(20.0), D = 1e-2, t = 0.5;
  const auto c = analytic_cumulants(lam, 1.0, D, t);
  const double pre = D / (2 * lam * lam);
  EXPECT_NEAR(c.var_plus, pre * (std::exp(2 * lam * t) - 1), 1e-15);
  EXPECT_NEAR(c.var_plus, 0.02164, 5e-5);
  EXPECT_NEAR(c.var_minus, 2.47e-4, 5e-7);
  EXPECT_NEAR(c.cross, -1.118e-3, 5e-7);
  EXPECT_EQ(c.mean_plus, 0.0);
}

TEST(Cumulants, CovarianceIsPositive) {
  for (double t : {1e-3, 0.1, 0.5, 2.0})
    for (double lam : {0.5, 4.0}) {
      const auto c = analytic_cumulants(lam, 1.0, 1e-2, t);
      EXPECT_GE(c.var_plus * c.var_minus - c.cross * c.cross, 0.0) << t << " " << lam;
      EXPECT_LE(c.var_minus, 1e-2 / (2 * lam * lam));
    }
}

TEST(Cumulants, ShortTimeLimitIsIsotropicDiffusion) {
  // var(u+) ~ var(u-) ~ D t / (m lambda) and cross ~ -D t / (m lambda)
  const double lam = 3.0, D = 0.02, t = 1e-6;
  const auto c = analytic_cumulants(lam, 1.0, D, t);
  EXPECT_NEAR(c.var_plus / (D * t / lam), 1.0, 1e-5);
  EXPECT_NEAR(c.var_minus / (D * t / lam), 1.0, 1e-5);
}

TEST(Cumulants, MeansFollowTheLinearFlow) {
  const auto c = analytic_cumulants(2.0, 1.0, 0.0, 0.7, 0.1, 0.2);
  const auto z = analytic_trajectory(0.1, 0.2, 2.0, 1.0, 0.7, {});
  const auto f = make_frame(2.0, 1.0);
  EXPECT_NEAR(c.mean_plus, f.u_plus(z.q, z.p), 1e-12);
  EXPECT_NEAR(c.mean_minus, f.u_minus(z.q, z.p), 1e-12);
}

TEST(Trajectory, ConstantForceClosedForm) {
  const double lam = 2.0, m = 1.5, F = 0.3, t = 0.8;
  const auto z = analytic_trajectory(0.0, 0.0, lam, m, t, std::vector<double>(4001, F));
  EXPECT_NEAR(z.q, F / (m * lam * lam) * (std::cosh(lam * t) - 1), 1e-7);
  EXPECT_NEAR(z.p, F / lam * std::sinh(lam * t), 1e-7);
}

TEST(Trajectory, SolvesLinearizedEquation) {
  // Finite differences of q(t) for a smooth force xi(u) = sin(u)
  const double lam = 1.5, m = 1.0, h = 1e-3;
  auto q_at = [&](double t) {
    std::vector<double> xi(20001);
    for (std::size_t k = 0; k < xi.size(); ++k) xi[k] = std::sin(t * static_cast<double>(k) / 20000.0);
    return analytic_trajectory(0.05, -0.02, lam, m, t, xi);
  };
  const double t = 0.6;
  const auto a = q_at(t - h), b = q_at(t), c = q_at(t + h);
  const double qdd = (a.q - 2 * b.q + c.q) / (h * h);
  EXPECT_NEAR(m * qdd, m * lam * lam * b.q + std::sin(t), 1e-4);
  EXPECT_NEAR((c.q - a.q) / (2 * h), b.p / m, 1e-5);
}

TEST(Smoothing, Width) {
  EXPECT_DOUBLE_EQ(smoothing_width(0.02, 2.0, 4.0, 0.5), std::sqrt(0.02 * 2.0 / 2.0));
  EXPECT_THROW(smoothing_width(-1, 1, 1, 1), Error);
}

TEST(MonteCarlo, ZeroNoiseHasNoSpread) {
  const auto s = undriven(0.0);
  const auto r = mc_cumulants({0, 0, 0}, make_frame(std::sqrt(20.0), 1.0), s, 0.5, 64, 1e-3, 1);
  EXPECT_EQ(r.value.var_plus, 0.0);
  EXPECT_EQ(r.value.var_minus, 0.0);
  EXPECT_EQ(r.value.cross, 0.0);
}

TEST(MonteCarlo, MatchesAnalyticWithinBootstrapErrors) {
  const double lam = std::sqrt(20.0), D = 1e-2, t = 0.5;
  const auto s = undriven(D);
  const auto r = mc_cumulants({0, 0, 0}, make_frame(lam, 1.0), s, t, 20000, 1e-4, 99);
  const auto a = analytic_cumulants(lam, 1.0, D, t);
  EXPECT_NEAR(r.value.var_plus, a.var_plus, 3 * r.se.var_plus);
  EXPECT_NEAR(r.value.var_minus, a.var_minus, 3 * r.se.var_minus);
  EXPECT_NEAR(r.value.cross, a.cross, 3 * r.se.cross);
  EXPECT_GT(r.se.var_plus, 0.0);
  // bootstrap SE of a variance ~ var sqrt(2/n) for near-Gaussian samples
  EXPECT_NEAR(r.se.var_plus / (a.var_plus * std::sqrt(2.0 / 20000)), 1.0, 0.25);
}

TEST(MonteCarlo, Reproducible) {
  const auto s = undriven(1e-2);
  const auto f = make_frame(std::sqrt(20.0), 1.0);
  const auto a = mc_cumulants({0, 0, 0}, f, s, 0.1, 1000, 1e-3, 5);
  const auto b = mc_cumulants({0, 0, 0}, f, s, 0.1, 1000, 1e-3, 5);
  EXPECT_EQ(cumulants_csv_row(a.value, a.se), cumulants_csv_row(b.value, b.se));
}

TEST(MonteCarlo, LeavesLinearRegime) {
  const auto s = undriven(1.0);
  try {
    mc_cumulants({0, 0, 0}, make_frame(std::sqrt(20.0), 1.0), s, 1.0, 200, 1e-3, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LinearRegimeExceeded);
  }
}
