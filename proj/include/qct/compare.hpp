#pragma once

// Quantum-classical agreement metrics: total-variation distance, p-slices
// with their correlation, and the three-way regime label.

#include <cmath>
#include <string>
#include <vector>

#include "qct/common.hpp"
#include "qct/grid.hpp"

namespace qct {

inline void require_same_grid(const PhaseSpaceField& a, const PhaseSpaceField& b) {
  if (!(a.grid == b.grid)) fail(ErrorKind::GridMismatch, "fields live on different grids");
}

/// 1/2 sum |a - b| dq dp; in [0, 1] for unit-mass inputs.
inline double l1_distance(const PhaseSpaceField& a, const PhaseSpaceField& b) {
  require_same_grid(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += std::abs(a.values[i] - b.values[i]);
  return 0.5 * s * a.grid.cell_area();
}

struct SliceRow {
  double q, f_a, f_b;
};

struct SliceComparison {
  double p_value = 0.0;  // grid momentum actually used
  std::vector<SliceRow> rows;
  double sup_diff = 0.0;
  double l1_slice = 0.0;     // sum |a - b| dq
  double correlation = 0.0;  // Pearson coefficient of the two slices
};

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return (sxx == syy) ? 1.0 : 0.0;
  return sxy / std::sqrt(sxx * syy);
}

inline SliceComparison compare_slices(const PhaseSpaceField& a, const PhaseSpaceField& b, double p_value) {
  require_same_grid(a, b);
  const std::size_t j = nearest_p_index(a.grid, p_value);
  SliceComparison out;
  out.p_value = a.grid.p(j);
  std::vector<double> xa, xb;
  for (std::size_t i = 0; i < a.grid.n_q; ++i) {
    const SliceRow r{a.grid.q(i), a.at(i, j), b.at(i, j)};
    out.rows.push_back(r);
    xa.push_back(r.f_a);
    xb.push_back(r.f_b);
    const double d = std::abs(r.f_a - r.f_b);
    out.sup_diff = std::max(out.sup_diff, d);
    out.l1_slice += d * a.grid.dq();
  }
  out.correlation = pearson(xa, xb);
  return out;
}

/// Fig-style overlay: q, classical slice, quantum slice.
inline std::string comparison_csv(const SliceComparison& c) {
  std::string out = "q,f_classical,f_quantum\n";
  for (const auto& r : c.rows) out += format_double(r.q) + "," + format_double(r.f_a) + "," + format_double(r.f_b) + "\n";
  return out;
}

enum class Regime { QuantumDominated, Semiclassical, ClassicalMatched };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::QuantumDominated: return "quantum_dominated";
    case Regime::Semiclassical: return "semiclassical";
    case Regime::ClassicalMatched: return "classical_matched";
  }
  return "unknown";
}

struct RegimeThresholds {
  double neg_hi = 0.1;
  double l1_lo = 0.05;
};

inline Regime classify_regime(double negativity_volume, double l1, const RegimeThresholds& th = {}) {
  if (negativity_volume > th.neg_hi) return Regime::QuantumDominated;
  if (l1 < th.l1_lo) return Regime::ClassicalMatched;
  return Regime::Semiclassical;
}

}  // namespace qct
