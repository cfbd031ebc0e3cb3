#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "loctomo/geometry.hpp"
#include "loctomo/volume.hpp"

namespace loctomo {

enum class PatchNormalization { none, per_series_zscore };

std::string_view to_string(PatchNormalization norm);
PatchNormalization parse_patch_normalization(std::string_view name);

struct PatchConfig {
  /// Patch side P (odd).
  int size = 11;
  /// Sample spacing in detector pixels.
  double delta = 1.0;
  PatchNormalization normalize = PatchNormalization::per_series_zscore;

  int half() const { return size / 2; }
  std::size_t patch_area() const { return static_cast<std::size_t>(size) * size; }
  std::size_t feature_dim(std::size_t tilt_count) const { return tilt_count * patch_area(); }
  /// Throws UsageError for an even or non-positive size or delta <= 0.
  void validate() const;

  bool operator==(const PatchConfig&) const = default;
};

/// Network input for one voxel: tilt-major, then row-major P x P patches.
struct FeatureVector {
  std::vector<float> values;
};

/// patch[i][j] = ytilde(world_to_detector(r, theta) - delta * (i, j)) for
/// i, j in [-P/2, P/2], stored row-major with i as the row. No normalization.
std::vector<double> extract_patch(const TiltSeries& filtered, std::size_t tilt_index, const Vec3& r,
                                  const PatchConfig& cfg);

/// Assembles feature vectors for one filtered series. The z-score statistics
/// are computed once, at construction.
class FeatureExtractor {
 public:
  /// Throws UsageError unless the series is filtered and NumericalError
  /// ("degenerate normalization") when z-scoring a series with zero variance.
  FeatureExtractor(const TiltSeries& filtered, const PatchConfig& cfg);

  std::size_t dim() const { return dim_; }
  const PatchConfig& config() const { return cfg_; }
  const TiltSeries& series() const { return *series_; }

  /// Writes dim() values into out.
  void extract(const Vec3& r, std::span<float> out) const;
  FeatureVector extract(const Vec3& r) const;

 private:
  const TiltSeries* series_;
  PatchConfig cfg_;
  std::size_t dim_;
  double mean_ = 0.0;
  double inv_std_ = 1.0;
  std::vector<TiltFrame> frames_;
};

FeatureVector assemble_features(const TiltSeries& filtered, const Vec3& r, const PatchConfig& cfg);

}  // namespace loctomo
