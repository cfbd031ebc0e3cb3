#include "loctomo/volume.hpp"

#include <cmath>
#include <string>

#include "loctomo/error.hpp"

namespace loctomo {

Volume::Volume(const GridSpec& grid) : grid_(grid) {
  grid_.validate();
  data_.assign(grid_.voxel_count(), 0.0);
}

Volume::Volume(const GridSpec& grid, std::vector<double> data) : grid_(grid), data_(std::move(data)) {
  grid_.validate();
  if (data_.size() != grid_.voxel_count()) {
    throw DataError("volume data holds " + std::to_string(data_.size()) + " values, grid needs " +
                    std::to_string(grid_.voxel_count()));
  }
}

namespace {

// Splits a fractional index into a base cell and weight. Returns false when
// the position lies beyond the zero-extended support [-1, n].
inline bool locate(double f, int n, int& i0, double& w) {
  if (!(f > -1.0 && f < static_cast<double>(n))) return false;
  const double fl = std::floor(f);
  i0 = static_cast<int>(fl);
  w = f - fl;
  return true;
}

}  // namespace

double sample_trilinear(const Volume& volume, const Vec3& r) {
  const GridSpec& g = volume.grid();
  int x0, y0, z0;
  double wx, wy, wz;
  if (!locate(index_coord(r.x, g.nx), g.nx, x0, wx) || !locate(index_coord(r.y, g.ny), g.ny, y0, wy) ||
      !locate(index_coord(r.z, g.nz), g.nz, z0, wz)) {
    return 0.0;
  }
  const auto data = volume.data();
  auto at = [&](int ix, int iy, int iz) -> double {
    if (ix < 0 || iy < 0 || iz < 0 || ix >= g.nx || iy >= g.ny || iz >= g.nz) return 0.0;
    return data[g.linear_index(ix, iy, iz)];
  };
  const double c00 = at(x0, y0, z0) * (1 - wx) + at(x0 + 1, y0, z0) * wx;
  const double c10 = at(x0, y0 + 1, z0) * (1 - wx) + at(x0 + 1, y0 + 1, z0) * wx;
  const double c01 = at(x0, y0, z0 + 1) * (1 - wx) + at(x0 + 1, y0, z0 + 1) * wx;
  const double c11 = at(x0, y0 + 1, z0 + 1) * (1 - wx) + at(x0 + 1, y0 + 1, z0 + 1) * wx;
  const double c0 = c00 * (1 - wy) + c10 * wy;
  const double c1 = c01 * (1 - wy) + c11 * wy;
  return c0 * (1 - wz) + c1 * wz;
}

double sample_bilinear(std::span<const double> image, int det_u, int det_v, const Vec2& uv) {
  int u0, v0;
  double wu, wv;
  if (!locate(index_coord(uv.u, det_u), det_u, u0, wu) || !locate(index_coord(uv.v, det_v), det_v, v0, wv)) {
    return 0.0;
  }
  auto at = [&](int iu, int iv) -> double {
    if (iu < 0 || iv < 0 || iu >= det_u || iv >= det_v) return 0.0;
    return image[static_cast<std::size_t>(iv) * det_u + iu];
  };
  const double r0 = at(u0, v0) * (1 - wu) + at(u0 + 1, v0) * wu;
  const double r1 = at(u0, v0 + 1) * (1 - wu) + at(u0 + 1, v0 + 1) * wu;
  return r0 * (1 - wv) + r1 * wv;
}

std::string_view to_string(SeriesKind kind) {
  switch (kind) {
    case SeriesKind::clean:
      return "clean";
    case SeriesKind::noisy:
      return "noisy";
    case SeriesKind::filtered:
      return "filtered";
  }
  return "unknown";
}

TiltSeries::TiltSeries(TiltGeometry geometry, int det_u, int det_v, SeriesKind kind, double pixel_size)
    : geometry_(std::move(geometry)), det_u_(det_u), det_v_(det_v), kind_(kind), pixel_size_(pixel_size) {
  if (det_u < 1 || det_v < 1) throw DataError("detector dimensions must be at least 1");
  if (geometry_.size() == 0) throw DataError("tilt series needs at least one tilt");
  data_.assign(geometry_.size() * pixels_per_image(), 0.0);
}

TiltSeries::TiltSeries(TiltGeometry geometry, int det_u, int det_v, SeriesKind kind, std::vector<double> data,
                       double pixel_size)
    : TiltSeries(std::move(geometry), det_u, det_v, kind, pixel_size) {
  if (data.size() != data_.size()) {
    throw DataError("tilt series data holds " + std::to_string(data.size()) + " values, expected " +
                    std::to_string(data_.size()));
  }
  data_ = std::move(data);
}

void require_finite(std::span<const double> values, std::string_view what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericalError(std::string(what) + " contains non-finite values");
  }
}

}  // namespace loctomo
