#pragma once

// Thin RAII wrapper over FFTW for one-dimensional complex transforms.

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <span>
#include <vector>

namespace negdelay::fft {

enum class Direction { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

namespace detail {
// The FFTW planner is not reentrant; plan execution is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// In-place unnormalised DFT:  X_k = sum_j x_j exp(sign * 2 pi i j k / n),
/// sign = -1 for forward, +1 for backward.
inline void transform(std::span<std::complex<double>> data, Direction dir) {
  if (data.size() < 2) return;
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(detail::planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(data.size()), p, p, static_cast<int>(dir),
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(detail::planner_mutex());
  fftw_destroy_plan(plan);
}

inline std::vector<std::complex<double>> transformed(std::vector<std::complex<double>> data,
                                                      Direction dir) {
  transform(data, dir);
  return data;
}

}  // namespace negdelay::fft
