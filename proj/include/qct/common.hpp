#pragma once

// Shared vocabulary: error kinds, phase points, and the deterministic
// work-partitioning helper used by every parallel loop in the library.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace qct {

inline constexpr double pi = std::numbers::pi;

enum class ErrorKind {
  InvalidArgument,
  NonFiniteState,
  NoConvergence,
  NotHyperbolic,
  BadExtents,
  NotPowerOfTwo,
  SupportClipped,
  OutOfRange,
  IoError,
  BadMagic,
  VersionMismatch,
  NonFiniteField,
  BoundaryMassExceeded,
  HermiticityLost,
  IncompatibleGrid,
  AllPointsOutsideGrid,
  LinearRegimeExceeded,
  NonChaotic,
  ArcBudgetExceeded,
  NoRoot,
  DegenerateForce,
  CausticUnresolved,
  NoBranches,
  DegenerateFilter,
  GridMismatch,
  ParseError,
  ValidationError,
  UnknownKey,
};

constexpr std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NotHyperbolic: return "NotHyperbolic";
    case ErrorKind::BadExtents: return "BadExtents";
    case ErrorKind::NotPowerOfTwo: return "NotPowerOfTwo";
    case ErrorKind::SupportClipped: return "SupportClipped";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::NonFiniteField: return "NonFiniteField";
    case ErrorKind::BoundaryMassExceeded: return "BoundaryMassExceeded";
    case ErrorKind::HermiticityLost: return "HermiticityLost";
    case ErrorKind::IncompatibleGrid: return "IncompatibleGrid";
    case ErrorKind::AllPointsOutsideGrid: return "AllPointsOutsideGrid";
    case ErrorKind::LinearRegimeExceeded: return "LinearRegimeExceeded";
    case ErrorKind::NonChaotic: return "NonChaotic";
    case ErrorKind::ArcBudgetExceeded: return "ArcBudgetExceeded";
    case ErrorKind::NoRoot: return "NoRoot";
    case ErrorKind::DegenerateForce: return "DegenerateForce";
    case ErrorKind::CausticUnresolved: return "CausticUnresolved";
    case ErrorKind::NoBranches: return "NoBranches";
    case ErrorKind::DegenerateFilter: return "DegenerateFilter";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::UnknownKey: return "UnknownKey";
  }
  return "Unknown";
}

/// Process exit-code class of an error: 2 config, 3 numerical, 4 I/O.
constexpr int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::ParseError:
    case ErrorKind::ValidationError:
    case ErrorKind::UnknownKey:
      return 2;
    case ErrorKind::IoError:
    case ErrorKind::BadMagic:
    case ErrorKind::VersionMismatch:
      return 4;
    default:
      return 3;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::InvalidArgument, what);
}

struct PhasePoint {
  double q = 0.0;
  double p = 0.0;
  double t = 0.0;

  bool finite() const { return std::isfinite(q) && std::isfinite(p) && std::isfinite(t); }
};

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// ---------------------------------------------------------------------------
// Worker cap. Every parallel loop splits its index range into contiguous
// chunks and each index is computed by exactly the same code regardless of
// the chunking, so results never depend on this value.

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{std::max(1u, std::thread::hardware_concurrency())};
  return cap;
}
}  // namespace detail

inline void set_max_threads(unsigned n) { detail::thread_cap() = std::max(1u, n); }
inline unsigned max_threads() { return detail::thread_cap(); }

/// Calls fn(begin, end) on contiguous sub-ranges of [0, n), possibly on
/// several threads. The first exception thrown by any worker is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t min_chunk = 1) {
  if (n == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(max_threads(), std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_chunk)));
  if (workers <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  const std::size_t base = n / workers, extra = n % workers;
  std::size_t begin = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t end = begin + base + (w < extra ? 1 : 0);
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
    begin = end;
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace qct
