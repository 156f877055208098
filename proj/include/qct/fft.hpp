#pragma once

// Thin RAII layer over FFTW3. Plans are always built with FFTW_ESTIMATE so the
// chosen algorithm, and hence every rounding, is the same on every run.

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <utility>

#include "qct/common.hpp"

namespace qct::fft {

static_assert(sizeof(std::complex<double>) == sizeof(fftw_complex));

/// The FFTW planner is not reentrant.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
class Buffer {
 public:
  Buffer() = default;
  explicit Buffer(std::size_t n) : n_(n), ptr_(static_cast<T*>(fftw_malloc(sizeof(T) * (n ? n : 1)))) {
    if (!ptr_) throw std::bad_alloc();
    std::fill(ptr_.get(), ptr_.get() + n_, T{});
  }

  T* data() { return ptr_.get(); }
  const T* data() const { return ptr_.get(); }
  std::size_t size() const { return n_; }
  T& operator[](std::size_t i) { return ptr_[i]; }
  const T& operator[](std::size_t i) const { return ptr_[i]; }

 private:
  struct Free {
    void operator()(T* p) const { fftw_free(p); }
  };
  std::size_t n_ = 0;
  std::unique_ptr<T[], Free> ptr_;
};

using ComplexBuffer = Buffer<std::complex<double>>;
using RealBuffer = Buffer<double>;

inline fftw_complex* raw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

class Plan {
 public:
  Plan() = default;
  explicit Plan(fftw_plan p) : plan_(p) {
    if (!plan_) fail(ErrorKind::InvalidArgument, "FFTW failed to create a plan");
  }
  Plan(Plan&& o) noexcept : plan_(std::exchange(o.plan_, nullptr)) {}
  Plan& operator=(Plan&& o) noexcept {
    if (this != &o) {
      reset();
      plan_ = std::exchange(o.plan_, nullptr);
    }
    return *this;
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() { reset(); }

  fftw_plan get() const { return plan_; }

 private:
  void reset() {
    if (plan_) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
      plan_ = nullptr;
    }
  }
  fftw_plan plan_ = nullptr;
};

/// Batched 1D real-to-complex transforms of `howmany` sequences.
inline Plan plan_r2c(int n, int howmany, double* in, int istride, int idist, std::complex<double>* out, int ostride,
                     int odist) {
  std::lock_guard lock(planner_mutex());
  return Plan(fftw_plan_many_dft_r2c(1, &n, howmany, in, nullptr, istride, idist, raw(out), nullptr, ostride, odist,
                                     FFTW_ESTIMATE));
}

inline Plan plan_c2r(int n, int howmany, std::complex<double>* in, int istride, int idist, double* out, int ostride,
                     int odist) {
  std::lock_guard lock(planner_mutex());
  return Plan(fftw_plan_many_dft_c2r(1, &n, howmany, raw(in), nullptr, istride, idist, out, nullptr, ostride, odist,
                                     FFTW_ESTIMATE | FFTW_DESTROY_INPUT));
}

inline Plan plan_c2c(int n, int howmany, std::complex<double>* in, int istride, int idist, std::complex<double>* out,
                     int ostride, int odist, int sign) {
  std::lock_guard lock(planner_mutex());
  return Plan(fftw_plan_many_dft(1, &n, howmany, raw(in), nullptr, istride, idist, raw(out), nullptr, ostride, odist,
                                 sign, FFTW_ESTIMATE));
}

inline void execute_r2c(const Plan& p, double* in, std::complex<double>* out) {
  fftw_execute_dft_r2c(p.get(), in, raw(out));
}
inline void execute_c2r(const Plan& p, std::complex<double>* in, double* out) {
  fftw_execute_dft_c2r(p.get(), raw(in), out);
}
inline void execute_c2c(const Plan& p, std::complex<double>* in, std::complex<double>* out) {
  fftw_execute_dft(p.get(), raw(in), raw(out));
}

}  // namespace qct::fft
