#include "loctomo/projector.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "loctomo/error.hpp"
#include "loctomo/random.hpp"

namespace loctomo {

namespace {

// Range of lattice indices k for which x0 + k * step * dx stays inside the
// zero-extended support (-(n+1)/2, (n+1)/2) of one axis.
void clip_axis(double x0, double dx, int n, double step, double& k_lo, double& k_hi) {
  const double half = 0.5 * (n + 1);
  if (std::fabs(dx) < 1e-15) {
    if (std::fabs(x0) >= half) {
      k_lo = 1.0;
      k_hi = 0.0;
    }
    return;
  }
  double a = (-half - x0) / (dx * step);
  double b = (half - x0) / (dx * step);
  if (a > b) std::swap(a, b);
  k_lo = std::max(k_lo, a);
  k_hi = std::min(k_hi, b);
}

}  // namespace

TiltSeries project(const Volume& volume, const TiltGeometry& geometry, int det_u, int det_v, double step) {
  if (det_u < 1 || det_v < 1) throw DataError("detector dimensions must be at least 1");
  if (!(step > 0.0)) throw UsageError("ray step must be positive");
  TiltSeries out(geometry, det_u, det_v, SeriesKind::clean);
  const GridSpec& g = volume.grid();
  const long total_rows = static_cast<long>(geometry.size()) * det_v;

#pragma omp parallel for schedule(dynamic)
  for (long row = 0; row < total_rows; ++row) {
    const std::size_t n = static_cast<std::size_t>(row / det_v);
    const int iv = static_cast<int>(row % det_v);
    const TiltFrame f = geometry.frame(n);
    const double v = centered_coord(iv, det_v);
    for (int iu = 0; iu < det_u; ++iu) {
      const double u = centered_coord(iu, det_u);
      // Ray origin where world_to_detector(origin) == (u, v), direction (sin, 0, cos).
      const Vec3 origin{u * f.cos, v, -u * f.sin};
      double k_lo = -1e300, k_hi = 1e300;
      clip_axis(origin.x, f.sin, g.nx, step, k_lo, k_hi);
      clip_axis(origin.z, f.cos, g.nz, step, k_lo, k_hi);
      if (std::fabs(v) >= 0.5 * (g.ny + 1)) k_hi = k_lo - 1.0;
      double sum = 0.0;
      if (k_lo <= k_hi) {
        const long first = static_cast<long>(std::ceil(k_lo));
        const long last = static_cast<long>(std::floor(k_hi));
        for (long k = first; k <= last; ++k) {
          const double t = static_cast<double>(k) * step;
          sum += sample_trilinear(volume, {origin.x + t * f.sin, v, origin.z + t * f.cos});
        }
      }
      out(n, iu, iv) = step * sum;
    }
  }
  return out;
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none:
      return "none";
    case NoiseKind::gaussian:
      return "gaussian";
    case NoiseKind::poisson:
      return "poisson";
  }
  return "unknown";
}

NoiseModel NoiseModel::parse(std::string_view text, std::uint64_t seed) {
  NoiseModel m;
  m.seed = seed;
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  double value = 0.0;
  if (colon != std::string_view::npos) {
    const std::string_view arg = text.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), value);
    if (ec != std::errc() || ptr != arg.data() + arg.size()) {
      throw UsageError("invalid noise parameter in '" + std::string(text) + "'");
    }
  }
  if (name == "none") {
    m.kind = NoiseKind::none;
  } else if (name == "gaussian") {
    m.kind = NoiseKind::gaussian;
    if (colon != std::string_view::npos) m.sigma = value;
  } else if (name == "poisson") {
    m.kind = NoiseKind::poisson;
    if (colon != std::string_view::npos) m.dose = value;
  } else {
    throw UsageError("unknown noise model '" + std::string(text) + "'");
  }
  m.validate();
  return m;
}

void NoiseModel::validate() const {
  if (kind == NoiseKind::gaussian && !(sigma >= 0.0)) throw UsageError("gaussian sigma must be >= 0");
  if (kind == NoiseKind::poisson && !(dose > 0.0)) throw UsageError("poisson dose must be > 0");
}

TiltSeries apply_noise(const TiltSeries& clean, const NoiseModel& model) {
  if (clean.kind() != SeriesKind::clean) throw UsageError("noise can only be applied to a clean series");
  model.validate();
  TiltSeries out = clean;
  out.set_kind(SeriesKind::noisy);
  if (model.kind == NoiseKind::none) return out;

  const auto in = clean.data();
  const std::size_t count = in.size();
  double mean = 0.0;
  for (double y : in) mean += y;
  mean /= static_cast<double>(count);

  const int det_u = clean.det_u();
  const std::size_t per_image = clean.pixels_per_image();
  auto pixel_rng = [&](std::size_t idx) {
    const std::size_t n = idx / per_image;
    const std::size_t rem = idx % per_image;
    return Rng(derive_seed(model.seed, {n, rem % det_u, rem / det_u}));
  };
  auto outd = out.data();

  if (model.kind == NoiseKind::gaussian) {
    double var = 0.0;
    for (double y : in) var += (y - mean) * (y - mean);
    const double scale = model.sigma * std::sqrt(var / static_cast<double>(count));
#pragma omp parallel for
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng = pixel_rng(i);
      outd[i] = in[i] + scale * rng.normal();
    }
    return out;
  }

  const auto [lo_it, hi_it] = std::minmax_element(in.begin(), in.end());
  const double lo = *lo_it;
  if (!(*hi_it > lo)) throw NumericalError("degenerate dose normalization");
  const double shifted_mean = mean - lo;
  const double alpha = model.dose / shifted_mean;
#pragma omp parallel for
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = pixel_rng(i);
    const double counts = static_cast<double>(rng.poisson(alpha * (in[i] - lo)));
    outd[i] = counts / alpha + lo;
  }
  return out;
}

}  // namespace loctomo
