#include "fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <vector>

namespace loctomo::fft {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

constexpr unsigned kFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;

}  // namespace

RealPlan1D::RealPlan1D(int n) : n_(n) {
  std::vector<double> r(static_cast<std::size_t>(n));
  std::vector<Complex> c(static_cast<std::size_t>(n / 2 + 1));
  auto* cc = reinterpret_cast<fftw_complex*>(c.data());
  std::lock_guard lock(planner_mutex());
  forward_ = fftw_plan_dft_r2c_1d(n, r.data(), cc, kFlags);
  inverse_ = fftw_plan_dft_c2r_1d(n, cc, r.data(), kFlags | FFTW_DESTROY_INPUT);
}

RealPlan1D::~RealPlan1D() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_));
}

void RealPlan1D::forward(double* in, Complex* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_), in, reinterpret_cast<fftw_complex*>(out));
}

void RealPlan1D::inverse(Complex* in, double* out) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_), reinterpret_cast<fftw_complex*>(in), out);
}

void forward_r2c(std::span<const int> dims, double* in, Complex* out) {
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c(static_cast<int>(dims.size()), dims.data(), in, reinterpret_cast<fftw_complex*>(out),
                             kFlags);
  }
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

void inverse_c2r(std::span<const int> dims, Complex* in, double* out) {
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_c2r(static_cast<int>(dims.size()), dims.data(), reinterpret_cast<fftw_complex*>(in), out,
                             kFlags | FFTW_DESTROY_INPUT);
  }
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace loctomo::fft
