#include "loctomo/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "fft.hpp"
#include "loctomo/error.hpp"

namespace loctomo {

namespace {

void require_same_grid(const Volume& a, const Volume& b) {
  if (!a.grid().same_shape(b.grid())) throw DataError("volumes are on different grids");
}

// Signed frequency index of DFT bin k on an axis of n samples.
inline int signed_bin(int k, int n) { return k <= n / 2 ? k : k - n; }

}  // namespace

FscCurve fsc(const Volume& a, const Volume& b, double shell_width) {
  require_same_grid(a, b);
  if (!(shell_width > 0.0)) throw UsageError("shell width must be positive");
  const GridSpec& g = a.grid();
  const std::array<int, 3> dims{g.nz, g.ny, g.nx};
  const int half_x = g.nx / 2 + 1;
  const std::size_t spectrum = static_cast<std::size_t>(g.nz) * g.ny * half_x;

  std::vector<fft::Complex> fa(spectrum), fb(spectrum);
  {
    std::vector<double> buf(a.data().begin(), a.data().end());
    fft::forward_r2c(dims, buf.data(), fa.data());
    buf.assign(b.data().begin(), b.data().end());
    fft::forward_r2c(dims, buf.data(), fb.data());
  }

  const double extent = std::min({g.nx, g.ny, g.nz});
  const auto max_shell = static_cast<std::size_t>(std::floor(0.5 * extent / shell_width + 1e-9));
  std::vector<double> cross(max_shell + 1, 0.0), pa(max_shell + 1, 0.0), pb(max_shell + 1, 0.0);
  std::vector<std::int64_t> counts(max_shell + 1, 0);

  for (int kz = 0; kz < g.nz; ++kz) {
    const double fz = static_cast<double>(signed_bin(kz, g.nz)) / g.nz;
    for (int ky = 0; ky < g.ny; ++ky) {
      const double fy = static_cast<double>(signed_bin(ky, g.ny)) / g.ny;
      for (int kx = 0; kx < half_x; ++kx) {
        const double fx = static_cast<double>(kx) / g.nx;
        const double radius = std::sqrt(fx * fx + fy * fy + fz * fz) * extent / shell_width;
        const auto shell = static_cast<std::size_t>(std::lround(radius));
        if (shell == 0 || shell > max_shell) continue;
        // Bins without a stored mirror stand for two coefficients.
        const bool self_mirrored = kx == 0 || (g.nx % 2 == 0 && kx == g.nx / 2);
        const double weight = self_mirrored ? 1.0 : 2.0;
        const std::size_t idx = (static_cast<std::size_t>(kz) * g.ny + ky) * half_x + kx;
        const fft::Complex& ca = fa[idx];
        const fft::Complex& cb = fb[idx];
        cross[shell] += weight * (ca.real() * cb.real() + ca.imag() * cb.imag());
        pa[shell] += weight * std::norm(ca);
        pb[shell] += weight * std::norm(cb);
        counts[shell] += self_mirrored ? 1 : 2;
      }
    }
  }

  FscCurve curve;
  for (std::size_t s = 1; s <= max_shell; ++s) {
    if (counts[s] == 0) continue;
    const double denom = std::sqrt(pa[s] * pb[s]);
    curve.frequencies.push_back(static_cast<double>(s) * shell_width / extent);
    curve.values.push_back(denom > 0.0 ? std::clamp(cross[s] / denom, -1.0, 1.0) : 0.0);
    curve.counts.push_back(counts[s]);
  }
  return curve;
}

double fsc_auc(const FscCurve& curve) {
  if (curve.values.empty()) throw UsageError("empty FSC curve");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.values.size(); ++i) {
    const double y0 = std::max(curve.values[i - 1], 0.0);
    const double y1 = std::max(curve.values[i], 0.0);
    area += 0.5 * (y0 + y1) * (curve.frequencies[i] - curve.frequencies[i - 1]);
  }
  return area;
}

double mse(const Volume& a, const Volume& b) {
  require_same_grid(a, b);
  const auto x = a.data();
  const auto y = b.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] - y[i]) * (x[i] - y[i]);
  return sum / static_cast<double>(x.size());
}

double psnr(const Volume& a, const Volume& b) {
  require_same_grid(a, b);
  const auto [lo, hi] = std::minmax_element(b.data().begin(), b.data().end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw NumericalError("psnr reference volume is constant");
  const double err = mse(a, b);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(range * range / err);
}

void write_fsc_csv(const std::filesystem::path& path, const FscCurve& curve) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write FSC curve " + path.string());
  out << "frequency,fsc,shell_count\n";
  char buf[96];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%lld\n", curve.frequencies[i], curve.values[i],
                  static_cast<long long>(curve.counts[i]));
    out << buf;
  }
  if (!out) throw DataError("failed writing FSC curve " + path.string());
}

}  // namespace loctomo
