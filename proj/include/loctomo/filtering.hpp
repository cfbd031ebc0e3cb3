#pragma once

#include <string_view>
#include <vector>

#include "loctomo/volume.hpp"

namespace loctomo {

enum class FilterKind { ramlak, hann };

std::string_view to_string(FilterKind kind);
/// Accepts "ramlak", "hann" and "hann_windowed_ramlak". Throws UsageError.
FilterKind parse_filter_kind(std::string_view name);

struct FilterSpec {
  FilterKind kind = FilterKind::ramlak;
  /// Rows are zero-padded to the next power of two >= pad_factor * det_u.
  int pad_factor = 2;
};

/// Padded row length for a detector width.
int padded_length(int det_u, int pad_factor);

/// Frequency response on the length-L DFT grid (FFTW ordering, first L/2+1
/// bins): |k|/L, times 0.5 (1 + cos(pi k / (L/2))) for the Hann variant.
std::vector<double> ramp_response(int length, FilterKind kind);

/// Ramp-filters every row (fixed v, varying u) of every projection.
/// Throws UsageError if the series is already filtered.
TiltSeries ramp_filter(const TiltSeries& series, const FilterSpec& spec = {});

}  // namespace loctomo
