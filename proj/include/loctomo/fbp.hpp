#pragma once

#include <vector>

#include "loctomo/filtering.hpp"
#include "loctomo/volume.hpp"

namespace loctomo {

/// Quadrature weight (radians) of each tilt: half the gap to each neighbour,
/// with an end tilt mirroring its single inner gap. Uniform spacing d gives
/// N * d, i.e. pi for a full half-turn. A single tilt gets pi.
std::vector<double> angular_weights(const TiltGeometry& geometry);

/// V(r) = sum_n w_n * ytilde_n(world_to_detector(r, theta_n)), bilinear
/// detector sampling with zero outside. Throws UsageError unless the series
/// is filtered and DataError if det_v != grid.ny.
Volume backproject(const TiltSeries& filtered, const GridSpec& grid);

/// ramp_filter followed by backproject.
Volume fbp(const TiltSeries& series, const GridSpec& grid, const FilterSpec& filter = {});

}  // namespace loctomo
