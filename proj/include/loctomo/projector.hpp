#pragma once

#include <cstdint>
#include <string_view>

#include "loctomo/geometry.hpp"
#include "loctomo/volume.hpp"

namespace loctomo {

/// Line integrals of `volume` along rays of direction (sin t, 0, cos t) through
/// every detector pixel, midpoint rule with spacing `step` (voxels). Sample
/// positions sit on the lattice t = k * step measured from the ray's closest
/// approach to the grid center. Throws DataError if det_u or det_v < 1 and
/// UsageError if step <= 0.
TiltSeries project(const Volume& volume, const TiltGeometry& geometry, int det_u, int det_v, double step = 1.0);

enum class NoiseKind { none, gaussian, poisson };

std::string_view to_string(NoiseKind kind);

struct NoiseModel {
  NoiseKind kind = NoiseKind::none;
  /// Gaussian: standard deviation relative to the clean series' standard deviation.
  double sigma = 0.5;
  /// Poisson: expected counts per pixel at the mean (shifted) projection level.
  double dose = 100.0;
  std::uint64_t seed = 0;

  /// Parses "none", "gaussian:<sigma>" or "poisson:<dose>". Throws UsageError.
  static NoiseModel parse(std::string_view text, std::uint64_t seed);
  void validate() const;
};

/// Draws y ~ P(y*). Every pixel uses its own generator derived from
/// (seed, tilt, iu, iv), so the result does not depend on evaluation order.
/// Throws UsageError unless the series is clean, NumericalError for a Poisson
/// model on a series without dynamic range ("degenerate dose normalization").
TiltSeries apply_noise(const TiltSeries& clean, const NoiseModel& model);

}  // namespace loctomo
