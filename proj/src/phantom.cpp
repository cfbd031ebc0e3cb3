#include "loctomo/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "loctomo/error.hpp"
#include "loctomo/random.hpp"

namespace loctomo {

std::string_view to_string(BlobKind kind) {
  switch (kind) {
    case BlobKind::ellipsoid:
      return "ellipsoid";
    case BlobKind::shell:
      return "shell";
    case BlobKind::rod:
      return "rod";
  }
  return "unknown";
}

BlobKind parse_blob_kind(std::string_view name) {
  if (name == "ellipsoid") return BlobKind::ellipsoid;
  if (name == "shell") return BlobKind::shell;
  if (name == "rod") return BlobKind::rod;
  throw UsageError("unknown blob kind '" + std::string(name) + "'");
}

Primitive Primitive::sphere(const Vec3& center, double radius, double density) {
  Primitive p;
  p.center = center;
  p.semi_axes = {radius, radius, radius};
  p.density = density;
  return p;
}

void PhantomSpec::validate() const {
  grid.validate();
  if (grid.nx < 8 || grid.ny < 8 || grid.nz < 8) throw UsageError("phantom grids must be at least 8^3");
  if (n_blobs < 1) throw UsageError("phantom needs at least one blob");
  if (!(density_lo <= density_hi)) throw UsageError("density range must satisfy lo <= hi");
}

namespace {

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

// Coordinates of p in the primitive's local frame.
Vec3 local(const Primitive& prim, const Vec3& p) {
  const Vec3 d{p.x - prim.center.x, p.y - prim.center.y, p.z - prim.center.z};
  return {dot(d, prim.axes[0]), dot(d, prim.axes[1]), dot(d, prim.axes[2])};
}

bool inside_ellipsoid(const Vec3& q, double a, double b, double c) {
  if (a <= 0.0 || b <= 0.0 || c <= 0.0) return false;
  const double s = (q.x / a) * (q.x / a) + (q.y / b) * (q.y / b) + (q.z / c) * (q.z / c);
  return s <= 1.0;
}

bool contains(const Primitive& prim, const Vec3& p) {
  const Vec3 q = local(prim, p);
  const auto& ax = prim.semi_axes;
  switch (prim.kind) {
    case BlobKind::ellipsoid:
      return inside_ellipsoid(q, ax[0], ax[1], ax[2]);
    case BlobKind::shell:
      return inside_ellipsoid(q, ax[0], ax[1], ax[2]) &&
             !inside_ellipsoid(q, ax[0] - prim.thickness, ax[1] - prim.thickness, ax[2] - prim.thickness);
    case BlobKind::rod: {
      const double radius = ax[0];
      return radius > 0.0 && q.x * q.x + q.y * q.y <= radius * radius && std::fabs(q.z) <= ax[2];
    }
  }
  return false;
}

double bounding_radius(const Primitive& prim) {
  const auto& ax = prim.semi_axes;
  if (prim.kind == BlobKind::rod) return std::sqrt(ax[0] * ax[0] + ax[2] * ax[2]);
  return std::max({ax[0], ax[1], ax[2]});
}

// Uniformly random rotation from a unit quaternion.
std::array<Vec3, 3> random_axes(Rng& rng) {
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double tau = 2.0 * std::numbers::pi;
  const double s1 = std::sqrt(1.0 - u1), s2 = std::sqrt(u1);
  const double w = s1 * std::sin(tau * u2), x = s1 * std::cos(tau * u2);
  const double y = s2 * std::sin(tau * u3), z = s2 * std::cos(tau * u3);
  return {Vec3{1 - 2 * (y * y + z * z), 2 * (x * y + w * z), 2 * (x * z - w * y)},
          Vec3{2 * (x * y - w * z), 1 - 2 * (x * x + z * z), 2 * (y * z + w * x)},
          Vec3{2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y)}};
}

}  // namespace

Volume rasterize(const GridSpec& grid, std::span<const Primitive> primitives, double background, int supersample) {
  if (supersample < 1) throw UsageError("supersample must be at least 1");
  Volume volume(grid);
  std::fill(volume.data().begin(), volume.data().end(), background);
  const double inv_count = 1.0 / (static_cast<double>(supersample) * supersample * supersample);

  for (const Primitive& prim : primitives) {
    const double reach = bounding_radius(prim) + 1.0;
    auto index_range = [&](double c, int n, int& lo, int& hi) {
      lo = std::max(0, static_cast<int>(std::floor(index_coord(c - reach, n))));
      hi = std::min(n - 1, static_cast<int>(std::ceil(index_coord(c + reach, n))));
    };
    int x_lo, x_hi, y_lo, y_hi, z_lo, z_hi;
    index_range(prim.center.x, grid.nx, x_lo, x_hi);
    index_range(prim.center.y, grid.ny, y_lo, y_hi);
    index_range(prim.center.z, grid.nz, z_lo, z_hi);

    bool covered_any = false;
    for (int iz = z_lo; iz <= z_hi; ++iz) {
      for (int iy = y_lo; iy <= y_hi; ++iy) {
        for (int ix = x_lo; ix <= x_hi; ++ix) {
          const Vec3 c = grid.centered(ix, iy, iz);
          int hits = 0;
          for (int sz = 0; sz < supersample; ++sz) {
            for (int sy = 0; sy < supersample; ++sy) {
              for (int sx = 0; sx < supersample; ++sx) {
                const Vec3 p{c.x + (sx + 0.5) / supersample - 0.5, c.y + (sy + 0.5) / supersample - 0.5,
                             c.z + (sz + 0.5) / supersample - 0.5};
                hits += contains(prim, p) ? 1 : 0;
              }
            }
          }
          if (hits > 0) {
            covered_any = true;
            volume(ix, iy, iz) += prim.density * hits * inv_count;
          }
        }
      }
    }
    if (!covered_any) {
      const int ix = static_cast<int>(std::lround(index_coord(prim.center.x, grid.nx)));
      const int iy = static_cast<int>(std::lround(index_coord(prim.center.y, grid.ny)));
      const int iz = static_cast<int>(std::lround(index_coord(prim.center.z, grid.nz)));
      if (ix >= 0 && iy >= 0 && iz >= 0 && ix < grid.nx && iy < grid.ny && iz < grid.nz) {
        volume(ix, iy, iz) += prim.density;
      }
    }
  }
  return volume;
}

std::vector<Primitive> draw_primitives(const PhantomSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, {0x70686e74ULL}));
  const GridSpec& g = spec.grid;
  const double extent = std::min({g.nx, g.ny, g.nz});
  std::vector<Primitive> prims;
  prims.reserve(static_cast<std::size_t>(spec.n_blobs));
  for (int b = 0; b < spec.n_blobs; ++b) {
    Primitive p;
    p.kind = spec.blob_kind;
    p.center = {rng.uniform(-0.35, 0.35) * g.nx, rng.uniform(-0.35, 0.35) * g.ny, rng.uniform(-0.35, 0.35) * g.nz};
    p.axes = random_axes(rng);
    switch (spec.blob_kind) {
      case BlobKind::ellipsoid:
        for (auto& a : p.semi_axes) a = rng.uniform(0.05, 0.15) * extent;
        break;
      case BlobKind::shell:
        for (auto& a : p.semi_axes) a = rng.uniform(0.08, 0.18) * extent;
        p.thickness = std::max(1.5, 0.3 * std::min({p.semi_axes[0], p.semi_axes[1], p.semi_axes[2]}));
        break;
      case BlobKind::rod: {
        const double radius = rng.uniform(0.025, 0.05) * extent;
        p.semi_axes = {radius, radius, rng.uniform(0.15, 0.35) * extent};
        break;
      }
    }
    p.density = rng.uniform(spec.density_lo, spec.density_hi);
    prims.push_back(p);
  }
  return prims;
}

Volume generate_phantom(const PhantomSpec& spec) {
  const auto prims = draw_primitives(spec);
  Volume v = rasterize(spec.grid, prims, spec.background);
  return v;
}

}  // namespace loctomo
