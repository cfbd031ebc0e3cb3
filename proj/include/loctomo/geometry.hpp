#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace loctomo {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Detector coordinate: u is perpendicular to the tilt axis (the filtered
/// axis), v is parallel to it.
struct Vec2 {
  double u = 0.0;
  double v = 0.0;
};

/// Centered coordinate of index i on an axis of n samples.
constexpr double centered_coord(double i, int n) { return i - 0.5 * (n - 1); }
/// Inverse of centered_coord; returns a fractional index.
constexpr double index_coord(double c, int n) { return c + 0.5 * (n - 1); }

/// Voxel grid. All geometry is in voxel units; voxel_size only labels axes.
struct GridSpec {
  int nx = 1;
  int ny = 1;
  int nz = 1;
  double voxel_size = 1.0;

  static GridSpec cube(int n, double voxel_size = 1.0) { return {n, n, n, voxel_size}; }

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  std::size_t linear_index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(nx) * (static_cast<std::size_t>(iy) + static_cast<std::size_t>(ny) * iz);
  }
  Vec3 centered(int ix, int iy, int iz) const {
    return {centered_coord(ix, nx), centered_coord(iy, ny), centered_coord(iz, nz)};
  }
  bool same_shape(const GridSpec& other) const { return nx == other.nx && ny == other.ny && nz == other.nz; }

  /// Throws DataError unless every dimension is positive and voxel_size > 0.
  void validate() const;
};

/// cos and sin of an angle in degrees; exact at multiples of 90.
struct TiltFrame {
  double cos = 1.0;
  double sin = 0.0;

  static TiltFrame from_degrees(double theta_deg);

  /// u coordinate of the rotated point; v is r.y.
  Vec2 to_detector(const Vec3& r) const { return {r.x * cos - r.z * sin, r.y}; }
  /// Rotation about the y axis used throughout the forward model.
  Vec3 rotate(const Vec3& r) const { return {r.x * cos - r.z * sin, r.y, r.x * sin + r.z * cos}; }
};

/// Ordered tilt angles (degrees) about the y axis.
class TiltGeometry {
 public:
  TiltGeometry() = default;
  /// Throws DataError if the list is empty, not strictly increasing, or leaves [-90, 90].
  explicit TiltGeometry(std::vector<double> angles_deg);

  /// count angles evenly spaced from start to stop, both ends included.
  static TiltGeometry uniform(double start_deg, double stop_deg, int count);

  std::size_t size() const { return angles_deg_.size(); }
  double angle_deg(std::size_t n) const { return angles_deg_[n]; }
  std::span<const double> angles_deg() const { return angles_deg_; }
  TiltFrame frame(std::size_t n) const { return TiltFrame::from_degrees(angles_deg_[n]); }

  bool operator==(const TiltGeometry&) const = default;

 private:
  std::vector<double> angles_deg_;
};

/// Detector coordinate sampled by the point r at tilt theta:
/// (r.x cos(theta) - r.z sin(theta), r.y).
Vec2 world_to_detector(const Vec3& r, double theta_deg);

}  // namespace loctomo
