#include "loctomo/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "loctomo/error.hpp"

namespace loctomo {

void GridSpec::validate() const {
  if (nx < 1 || ny < 1 || nz < 1) {
    throw DataError("grid dimensions must be positive, got " + std::to_string(nx) + "x" + std::to_string(ny) +
                    "x" + std::to_string(nz));
  }
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) throw DataError("voxel size must be positive");
}

TiltFrame TiltFrame::from_degrees(double theta_deg) {
  if (theta_deg == 0.0) return {1.0, 0.0};
  if (theta_deg == 90.0) return {0.0, 1.0};
  if (theta_deg == -90.0) return {0.0, -1.0};
  const double rad = theta_deg * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

TiltGeometry::TiltGeometry(std::vector<double> angles_deg) : angles_deg_(std::move(angles_deg)) {
  if (angles_deg_.empty()) throw DataError("tilt geometry needs at least one angle");
  for (std::size_t n = 0; n < angles_deg_.size(); ++n) {
    const double a = angles_deg_[n];
    if (!std::isfinite(a) || a < -90.0 || a > 90.0) {
      throw DataError("tilt angle " + std::to_string(a) + " outside [-90, 90]");
    }
    if (n > 0 && !(a > angles_deg_[n - 1])) throw DataError("tilt angles must be strictly increasing");
  }
}

TiltGeometry TiltGeometry::uniform(double start_deg, double stop_deg, int count) {
  if (count < 1) throw UsageError("tilt count must be at least 1");
  if (count == 1) {
    if (start_deg != stop_deg) throw UsageError("a single tilt needs start == stop");
    return TiltGeometry({start_deg});
  }
  std::vector<double> angles(static_cast<std::size_t>(count));
  const double step = (stop_deg - start_deg) / (count - 1);
  for (int n = 0; n < count; ++n) angles[n] = start_deg + step * n;
  angles.back() = stop_deg;
  return TiltGeometry(std::move(angles));
}

Vec2 world_to_detector(const Vec3& r, double theta_deg) { return TiltFrame::from_degrees(theta_deg).to_detector(r); }

}  // namespace loctomo
