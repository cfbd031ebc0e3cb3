#pragma once

#include <complex>
#include <span>

// Thin FFTW wrappers. Plans are built with FFTW_ESTIMATE (deterministic) under
// a global lock; execution uses the new-array interface and is thread-safe.

namespace loctomo::fft {

using Complex = std::complex<double>;

class RealPlan1D {
 public:
  explicit RealPlan1D(int n);
  ~RealPlan1D();
  RealPlan1D(const RealPlan1D&) = delete;
  RealPlan1D& operator=(const RealPlan1D&) = delete;

  int size() const { return n_; }
  /// in: n reals, out: n/2+1 coefficients (unnormalized).
  void forward(double* in, Complex* out) const;
  /// in: n/2+1 coefficients (overwritten), out: n reals (unnormalized).
  void inverse(Complex* in, double* out) const;

 private:
  int n_;
  void* forward_ = nullptr;
  void* inverse_ = nullptr;
};

/// Unnormalized real-to-complex transform of a row-major array with
/// dims[0] slowest. Output has dims[0] x ... x (dims.back()/2+1) entries.
void forward_r2c(std::span<const int> dims, double* in, Complex* out);
/// Unnormalized complex-to-real inverse; `in` is destroyed.
void inverse_c2r(std::span<const int> dims, Complex* in, double* out);

}  // namespace loctomo::fft
