#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "loctomo/volume.hpp"

namespace loctomo {

struct FscCurve {
  std::vector<double> frequencies;  // cycles per voxel, in (0, 0.5]
  std::vector<double> values;
  std::vector<std::int64_t> counts;  // Fourier coefficients per shell (full spectrum)

  std::size_t size() const { return values.size(); }
};

/// Fourier shell correlation between two volumes on the same grid.
///
/// Shell s collects coefficients whose normalized frequency radius, in units
/// of shell_width / min(nx, ny, nz), rounds to s. DC (s = 0), shells beyond
/// 0.5 cycles/voxel and empty shells are dropped. Throws DataError on a grid
/// mismatch and UsageError for shell_width <= 0.
FscCurve fsc(const Volume& a, const Volume& b, double shell_width = 1.0);

/// Trapezoidal integral of max(value, 0) over the shell frequencies.
double fsc_auc(const FscCurve& curve);

double mse(const Volume& a, const Volume& b);

/// 10 log10(range(b)^2 / mse(a, b)), b is the reference. Returns +infinity
/// when the volumes are identical; throws NumericalError for a constant b.
double psnr(const Volume& a, const Volume& b);

/// CSV with header "frequency,fsc,shell_count".
void write_fsc_csv(const std::filesystem::path& path, const FscCurve& curve);

}  // namespace loctomo
