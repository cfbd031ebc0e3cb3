#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "loctomo/geometry.hpp"

namespace loctomo {

/// Dense scalar field on a GridSpec, ix fastest in memory.
class Volume {
 public:
  Volume() = default;
  explicit Volume(const GridSpec& grid);
  /// Throws DataError if data.size() != grid.voxel_count().
  Volume(const GridSpec& grid, std::vector<double> data);

  const GridSpec& grid() const { return grid_; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int ix, int iy, int iz) { return data_[grid_.linear_index(ix, iy, iz)]; }
  double operator()(int ix, int iy, int iz) const { return data_[grid_.linear_index(ix, iy, iz)]; }

  void set_voxel_size(double voxel_size) { grid_.voxel_size = voxel_size; }

 private:
  GridSpec grid_;
  std::vector<double> data_;
};

/// Trilinear interpolation at a centered position. The grid is zero-extended,
/// so values fall to zero within one voxel outside the outermost centers.
double sample_trilinear(const Volume& volume, const Vec3& r);

/// Bilinear interpolation of a det_u x det_v image (u fastest) at a centered
/// detector position, zero-extended like sample_trilinear.
double sample_bilinear(std::span<const double> image, int det_u, int det_v, const Vec2& uv);

enum class SeriesKind { clean, noisy, filtered };

std::string_view to_string(SeriesKind kind);

/// Stack of projections, one det_u x det_v image per tilt (u fastest).
class TiltSeries {
 public:
  TiltSeries() = default;
  TiltSeries(TiltGeometry geometry, int det_u, int det_v, SeriesKind kind, double pixel_size = 1.0);
  /// Throws DataError on a size mismatch.
  TiltSeries(TiltGeometry geometry, int det_u, int det_v, SeriesKind kind, std::vector<double> data,
             double pixel_size = 1.0);

  const TiltGeometry& geometry() const { return geometry_; }
  std::size_t tilt_count() const { return geometry_.size(); }
  int det_u() const { return det_u_; }
  int det_v() const { return det_v_; }
  SeriesKind kind() const { return kind_; }
  double pixel_size() const { return pixel_size_; }
  std::size_t pixels_per_image() const { return static_cast<std::size_t>(det_u_) * det_v_; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> image(std::size_t n) { return std::span(data_).subspan(n * pixels_per_image(), pixels_per_image()); }
  std::span<const double> image(std::size_t n) const {
    return std::span(data_).subspan(n * pixels_per_image(), pixels_per_image());
  }

  double& operator()(std::size_t n, int iu, int iv) {
    return data_[n * pixels_per_image() + static_cast<std::size_t>(iv) * det_u_ + iu];
  }
  double operator()(std::size_t n, int iu, int iv) const {
    return data_[n * pixels_per_image() + static_cast<std::size_t>(iv) * det_u_ + iu];
  }

  /// Bilinear sample of projection n at a centered detector position.
  double sample(std::size_t n, const Vec2& uv) const { return sample_bilinear(image(n), det_u_, det_v_, uv); }

  void set_kind(SeriesKind kind) { kind_ = kind; }
  void set_pixel_size(double pixel_size) { pixel_size_ = pixel_size; }

 private:
  TiltGeometry geometry_;
  int det_u_ = 0;
  int det_v_ = 0;
  SeriesKind kind_ = SeriesKind::clean;
  double pixel_size_ = 1.0;
  std::vector<double> data_;
};

/// Throws NumericalError naming `what` if any value is NaN or infinite.
void require_finite(std::span<const double> values, std::string_view what);

}  // namespace loctomo
