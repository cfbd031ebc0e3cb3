#include "loctomo/filtering.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "fft.hpp"
#include "loctomo/error.hpp"

namespace loctomo {

std::string_view to_string(FilterKind kind) { return kind == FilterKind::ramlak ? "ramlak" : "hann"; }

FilterKind parse_filter_kind(std::string_view name) {
  if (name == "ramlak") return FilterKind::ramlak;
  if (name == "hann" || name == "hann_windowed_ramlak") return FilterKind::hann;
  throw UsageError("unknown filter '" + std::string(name) + "'");
}

int padded_length(int det_u, int pad_factor) {
  if (pad_factor < 2) throw UsageError("filter pad factor must be at least 2");
  return static_cast<int>(std::bit_ceil(static_cast<unsigned>(pad_factor) * static_cast<unsigned>(det_u)));
}

std::vector<double> ramp_response(int length, FilterKind kind) {
  const int bins = length / 2 + 1;
  const double k_max = 0.5 * length;
  std::vector<double> h(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    h[k] = static_cast<double>(k) / length;
    if (kind == FilterKind::hann) h[k] *= 0.5 * (1.0 + std::cos(std::numbers::pi * k / k_max));
  }
  return h;
}

TiltSeries ramp_filter(const TiltSeries& series, const FilterSpec& spec) {
  if (series.kind() == SeriesKind::filtered) throw UsageError("series is already filtered");
  const int det_u = series.det_u();
  const int length = padded_length(det_u, spec.pad_factor);
  const auto response = ramp_response(length, spec.kind);
  const fft::RealPlan1D plan(length);

  TiltSeries out = series;
  out.set_kind(SeriesKind::filtered);
  auto data = out.data();
  const long rows = static_cast<long>(series.tilt_count()) * series.det_v();
  const double norm = 1.0 / length;

#pragma omp parallel
  {
    std::vector<double> buf(static_cast<std::size_t>(length));
    std::vector<fft::Complex> spec_buf(response.size());
#pragma omp for
    for (long row = 0; row < rows; ++row) {
      double* line = data.data() + static_cast<std::size_t>(row) * det_u;
      std::fill(buf.begin(), buf.end(), 0.0);
      std::copy(line, line + det_u, buf.begin());
      plan.forward(buf.data(), spec_buf.data());
      for (std::size_t k = 0; k < response.size(); ++k) spec_buf[k] *= response[k] * norm;
      plan.inverse(spec_buf.data(), buf.data());
      std::copy(buf.begin(), buf.begin() + det_u, line);
    }
  }
  return out;
}

}  // namespace loctomo
