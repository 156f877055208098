#pragma once

// Phase-space discretization shared by the Wigner and Fokker-Planck solvers:
// the grid, the field container, moment/negativity diagnostics, slices, and
// the binary field dump.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "qct/common.hpp"

namespace qct {

struct PhaseSpaceGrid {
  double q_min = -10.0, q_max = 10.0;
  double p_min = -20.0, p_max = 20.0;
  std::size_t n_q = 512, n_p = 512;

  double dq() const { return (q_max - q_min) / static_cast<double>(n_q); }
  double dp() const { return (p_max - p_min) / static_cast<double>(n_p); }
  double cell_area() const { return dq() * dp(); }
  double q(std::size_t i) const { return q_min + static_cast<double>(i) * dq(); }
  double p(std::size_t j) const { return p_min + static_cast<double>(j) * dp(); }
  std::size_t size() const { return n_q * n_p; }

  friend bool operator==(const PhaseSpaceGrid&, const PhaseSpaceGrid&) = default;
};

inline PhaseSpaceGrid init_grid(double q_min, double q_max, double p_min, double p_max, std::size_t n_q,
                                std::size_t n_p) {
  if (!(q_max > q_min) || !(p_max > p_min) || !std::isfinite(q_max - q_min) || !std::isfinite(p_max - p_min))
    fail(ErrorKind::BadExtents, "grid extents must satisfy max > min");
  if (!is_power_of_two(n_q) || !is_power_of_two(n_p) || n_q < 16 || n_p < 16)
    fail(ErrorKind::NotPowerOfTwo, "grid point counts must be powers of two >= 16");
  return {q_min, q_max, p_min, p_max, n_q, n_p};
}

inline PhaseSpaceGrid default_grid() { return init_grid(-10, 10, -20, 20, 512, 512); }

enum class FieldKind : std::uint32_t { Wigner = 0, Classical = 1 };

/// Row-major samples f(q_i, p_j) at values[i * n_p + j]; q is the outer index.
struct PhaseSpaceField {
  PhaseSpaceGrid grid;
  std::vector<double> values;
  double t = 0.0;
  double hbar = 0.1;
  FieldKind kind = FieldKind::Wigner;

  PhaseSpaceField() = default;
  PhaseSpaceField(const PhaseSpaceGrid& g, FieldKind k, double hbar_, double time = 0.0)
      : grid(g), values(g.size(), 0.0), t(time), hbar(hbar_), kind(k) {}

  double& at(std::size_t i, std::size_t j) { return values[i * grid.n_p + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * grid.n_p + j]; }
};

struct Diagnostics {
  double t = 0.0;
  double norm = 0.0;
  double mean_q = 0.0, mean_p = 0.0;
  double var_q = 0.0, var_p = 0.0, cov_qp = 0.0;
  double negativity_volume = 0.0;
  double min_value = 0.0;
  double max_value = 0.0;
  double boundary_mass = 0.0;  // sum over the four edge strips of |mass in the strip|
  double purity = 0.0;  // sum f^2 dq dp
};

/// Midpoint-quadrature moments. Rows are accumulated in index order so the
/// result is independent of how the caller parallelizes anything else.
inline Diagnostics diagnostics(const PhaseSpaceField& f) {
  const auto& g = f.grid;
  const double area = g.cell_area();
  Diagnostics d;
  d.t = f.t;
  d.min_value = f.values.empty() ? 0.0 : f.values[0];
  d.max_value = d.min_value;
  double s0 = 0, sq = 0, sp = 0, sqq = 0, spp = 0, sqp = 0, neg = 0, sff = 0;
  double q_lo = 0, q_hi = 0, p_lo = 0, p_hi = 0;
  for (std::size_t i = 0; i < g.n_q; ++i) {
    const double q = g.q(i);
    const bool edge_row = i < 2 || i + 2 >= g.n_q;
    double r0 = 0, rp = 0, rpp = 0, rneg = 0, rlo = 0, rhi = 0, rff = 0;
    for (std::size_t j = 0; j < g.n_p; ++j) {
      const double v = f.at(i, j);
      const double p = g.p(j);
      r0 += v;
      rp += v * p;
      rpp += v * p * p;
      rff += v * v;
      if (v < 0) rneg -= v;
      if (j < 2) rlo += v;
      if (j + 2 >= g.n_p) rhi += v;
      d.min_value = std::min(d.min_value, v);
      d.max_value = std::max(d.max_value, v);
    }
    s0 += r0;
    sq += q * r0;
    sqq += q * q * r0;
    sp += rp;
    spp += rpp;
    sqp += q * rp;
    neg += rneg;
    if (i < 2) q_lo += r0;
    if (i + 2 >= g.n_q) q_hi += r0;
    if (!edge_row) {
      p_lo += rlo;
      p_hi += rhi;
    }
    sff += rff;
  }
  d.norm = s0 * area;
  d.negativity_volume = neg * area;
  d.boundary_mass = (std::abs(q_lo) + std::abs(q_hi) + std::abs(p_lo) + std::abs(p_hi)) * area;
  d.purity = sff * area;
  if (s0 != 0.0) {
    d.mean_q = sq / s0;
    d.mean_p = sp / s0;
    d.var_q = sqq / s0 - d.mean_q * d.mean_q;
    d.var_p = spp / s0 - d.mean_p * d.mean_p;
    d.cov_qp = sqp / s0 - d.mean_q * d.mean_p;
  }
  return d;
}

inline bool all_finite(const PhaseSpaceField& f) {
  return std::all_of(f.values.begin(), f.values.end(), [](double v) { return std::isfinite(v); });
}

inline void normalize(PhaseSpaceField& f) {
  double s = 0;
  for (double v : f.values) s += v;
  const double norm = s * f.grid.cell_area();
  require(norm != 0.0 && std::isfinite(norm), "normalize: field has zero or non-finite mass");
  for (double& v : f.values) v /= norm;
}

struct CoherentState {
  double q0 = 1.0;
  double p0 = 0.0;
  double sigma_q = 0.0;  // <= 0 selects the minimum-uncertainty width sqrt(hbar/2)

  double width_q(double hbar) const { return sigma_q > 0.0 ? sigma_q : std::sqrt(0.5 * hbar); }
  double width_p(double hbar) const { return hbar / (2.0 * width_q(hbar)); }
};

/// Gaussian Wigner function of a coherent state, normalized on the grid. The
/// same field seeds the classical solvers (kind is set by the caller).
inline PhaseSpaceField init_coherent_state(const PhaseSpaceGrid& g, const CoherentState& cs, double hbar,
                                           FieldKind kind = FieldKind::Wigner) {
  require(hbar > 0.0, "init_coherent_state: hbar must be > 0");
  require(cs.sigma_q >= 0.0, "init_coherent_state: sigma_q must be >= 0");
  const double sq = cs.width_q(hbar), sp = cs.width_p(hbar);
  if (cs.q0 - 5 * sq < g.q_min || cs.q0 + 5 * sq > g.q_max || cs.p0 - 5 * sp < g.p_min || cs.p0 + 5 * sp > g.p_max)
    fail(ErrorKind::SupportClipped, "coherent state closer than 5 sigma to the grid edge");
  PhaseSpaceField f(g, kind, hbar);
  const double peak = 1.0 / (pi * hbar);
  for (std::size_t i = 0; i < g.n_q; ++i) {
    const double a = (g.q(i) - cs.q0) / sq;
    for (std::size_t j = 0; j < g.n_p; ++j) {
      const double b = (g.p(j) - cs.p0) / sp;
      f.at(i, j) = peak * std::exp(-0.5 * (a * a + b * b));
    }
  }
  normalize(f);
  if (diagnostics(f).boundary_mass > 1e-10) fail(ErrorKind::SupportClipped, "coherent state mass at the grid edge");
  return f;
}

/// Nearest-row extraction at fixed momentum; no interpolation.
inline std::size_t nearest_p_index(const PhaseSpaceGrid& g, double p_value) {
  if (!(p_value >= g.p_min && p_value <= g.p_max)) fail(ErrorKind::OutOfRange, "slice momentum outside grid");
  const double x = (p_value - g.p_min) / g.dp();
  auto j = static_cast<std::size_t>(std::llround(x));
  return std::min(j, g.n_p - 1);
}

inline std::vector<std::pair<double, double>> slice_at_p(const PhaseSpaceField& f, double p_value) {
  const std::size_t j = nearest_p_index(f.grid, p_value);
  std::vector<std::pair<double, double>> out;
  out.reserve(f.grid.n_q);
  for (std::size_t i = 0; i < f.grid.n_q; ++i) out.emplace_back(f.grid.q(i), f.at(i, j));
  return out;
}

// ---------------------------------------------------------------------------
// I/O

/// Shortest decimal form that reads back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "field dump writer assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

template <class T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) fail(ErrorKind::IoError, "truncated field dump");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

inline std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::IoError, "read failed for " + path.string());
  return data;
}

inline void write_all(const std::filesystem::path& path, const std::string& data, bool binary = true) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

}  // namespace detail

inline constexpr char field_magic[4] = {'Q', 'C', 'T', 'G'};
inline constexpr std::uint32_t field_version = 1;

inline std::string encode_field(const PhaseSpaceField& f) {
  std::string out;
  out.reserve(4 + 12 + 48 + 4 + f.values.size() * 8);
  out.append(field_magic, 4);
  detail::put<std::uint32_t>(out, field_version);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.grid.n_q));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.grid.n_p));
  for (double v : {f.grid.q_min, f.grid.q_max, f.grid.p_min, f.grid.p_max, f.t, f.hbar}) detail::put<double>(out, v);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(f.kind));
  for (double v : f.values) detail::put<double>(out, v);
  return out;
}

inline PhaseSpaceField decode_field(const std::string& data) {
  if (data.size() < 4 || std::memcmp(data.data(), field_magic, 4) != 0) fail(ErrorKind::BadMagic, "not a field dump");
  std::size_t pos = 4;
  const auto version = detail::get<std::uint32_t>(data, pos);
  if (version != field_version) fail(ErrorKind::VersionMismatch, "field dump version " + std::to_string(version));
  const auto n_q = detail::get<std::uint32_t>(data, pos);
  const auto n_p = detail::get<std::uint32_t>(data, pos);
  double hdr[6];
  for (double& v : hdr) v = detail::get<double>(data, pos);
  const auto kind = detail::get<std::uint32_t>(data, pos);
  if (kind > 1) fail(ErrorKind::IoError, "unknown field kind");
  PhaseSpaceGrid g;
  try {
    g = init_grid(hdr[0], hdr[1], hdr[2], hdr[3], n_q, n_p);
  } catch (const Error& e) {
    fail(ErrorKind::IoError, std::string("corrupt grid header: ") + e.what());
  }
  const std::size_t need = g.size() * sizeof(double);
  if (data.size() - pos != need) fail(ErrorKind::IoError, "field dump payload size mismatch");
  PhaseSpaceField f(g, static_cast<FieldKind>(kind), hdr[5], hdr[4]);
  std::memcpy(f.values.data(), data.data() + pos, need);
  return f;
}

inline void write_field(const PhaseSpaceField& f, const std::filesystem::path& path) {
  detail::write_all(path, encode_field(f));
}

inline PhaseSpaceField read_field(const std::filesystem::path& path) { return decode_field(detail::read_all(path)); }

inline std::string slice_csv(const std::vector<std::pair<double, double>>& rows) {
  std::string out = "q,f\n";
  for (const auto& [q, v] : rows) out += format_double(q) + "," + format_double(v) + "\n";
  return out;
}

}  // namespace qct
