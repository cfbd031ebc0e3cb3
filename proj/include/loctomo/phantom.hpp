#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "loctomo/geometry.hpp"
#include "loctomo/volume.hpp"

namespace loctomo {

enum class BlobKind { ellipsoid, shell, rod };

std::string_view to_string(BlobKind kind);
/// Throws UsageError on an unknown name.
BlobKind parse_blob_kind(std::string_view name);

/// One solid primitive in centered voxel coordinates.
///
/// - ellipsoid: semi_axes along the three orthonormal `axes`.
/// - shell: the ellipsoid minus an inner ellipsoid shrunk by `thickness`.
/// - rod: a cylinder of radius semi_axes[0] and half-length semi_axes[2] along axes[2].
struct Primitive {
  BlobKind kind = BlobKind::ellipsoid;
  Vec3 center;
  std::array<double, 3> semi_axes{1.0, 1.0, 1.0};
  std::array<Vec3, 3> axes{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
  double density = 1.0;
  double thickness = 2.0;

  static Primitive sphere(const Vec3& center, double radius, double density);
};

struct PhantomSpec {
  GridSpec grid = GridSpec::cube(64);
  std::uint64_t seed = 0;
  int n_blobs = 16;
  BlobKind blob_kind = BlobKind::ellipsoid;
  double density_lo = 0.5;
  double density_hi = 1.0;
  double background = 0.0;

  /// Throws UsageError for n_blobs < 1, lo > hi, or a grid smaller than 8 per axis.
  void validate() const;
};

/// Adds each primitive's partial-volume coverage (supersample^3 points per
/// voxel) times its density onto `background`. A primitive too small to
/// cover any subsample deposits its density on the voxel nearest its center.
Volume rasterize(const GridSpec& grid, std::span<const Primitive> primitives, double background,
                 int supersample = 4);

/// Randomly placed and oriented primitives, deterministic in spec.seed.
std::vector<Primitive> draw_primitives(const PhantomSpec& spec);

Volume generate_phantom(const PhantomSpec& spec);

}  // namespace loctomo
