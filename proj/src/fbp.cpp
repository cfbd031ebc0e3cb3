#include "loctomo/fbp.hpp"

#include <numbers>
#include <string>

#include "loctomo/error.hpp"

namespace loctomo {

std::vector<double> angular_weights(const TiltGeometry& geometry) {
  const std::size_t n = geometry.size();
  std::vector<double> w(n, std::numbers::pi);
  if (n < 2) return w;
  const double to_rad = std::numbers::pi / 180.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double prev = i > 0 ? geometry.angle_deg(i) - geometry.angle_deg(i - 1)
                              : geometry.angle_deg(1) - geometry.angle_deg(0);
    const double next = i + 1 < n ? geometry.angle_deg(i + 1) - geometry.angle_deg(i)
                                  : geometry.angle_deg(n - 1) - geometry.angle_deg(n - 2);
    w[i] = 0.5 * (prev + next) * to_rad;
  }
  return w;
}

Volume backproject(const TiltSeries& filtered, const GridSpec& grid) {
  if (filtered.kind() != SeriesKind::filtered) throw UsageError("backprojection needs a filtered series");
  if (filtered.det_v() != grid.ny) {
    throw DataError("detector rows (" + std::to_string(filtered.det_v()) + ") must match grid ny (" +
                    std::to_string(grid.ny) + ")");
  }
  Volume out(grid);
  const auto weights = angular_weights(filtered.geometry());
  const std::size_t tilts = filtered.tilt_count();
  std::vector<TiltFrame> frames(tilts);
  for (std::size_t n = 0; n < tilts; ++n) frames[n] = filtered.geometry().frame(n);
  auto data = out.data();
  const long planes = static_cast<long>(grid.nz) * grid.ny;

#pragma omp parallel for schedule(static)
  for (long plane = 0; plane < planes; ++plane) {
    const int iz = static_cast<int>(plane / grid.ny);
    const int iy = static_cast<int>(plane % grid.ny);
    for (int ix = 0; ix < grid.nx; ++ix) {
      const Vec3 r = grid.centered(ix, iy, iz);
      double acc = 0.0;
      for (std::size_t n = 0; n < tilts; ++n) acc += weights[n] * filtered.sample(n, frames[n].to_detector(r));
      data[grid.linear_index(ix, iy, iz)] = acc;
    }
  }
  return out;
}

Volume fbp(const TiltSeries& series, const GridSpec& grid, const FilterSpec& filter) {
  return backproject(ramp_filter(series, filter), grid);
}

}  // namespace loctomo
