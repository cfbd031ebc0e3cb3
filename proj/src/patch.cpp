#include "loctomo/patch.hpp"

#include <cmath>
#include <string>

#include "loctomo/error.hpp"

namespace loctomo {

std::string_view to_string(PatchNormalization norm) {
  return norm == PatchNormalization::none ? "none" : "per_series_zscore";
}

PatchNormalization parse_patch_normalization(std::string_view name) {
  if (name == "none") return PatchNormalization::none;
  if (name == "per_series_zscore") return PatchNormalization::per_series_zscore;
  throw UsageError("unknown patch normalization '" + std::string(name) + "'");
}

void PatchConfig::validate() const {
  if (size < 1 || size % 2 == 0) throw UsageError("patch size must be a positive odd integer");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw UsageError("patch spacing must be positive");
}

namespace {

// Interpolation taps of one detector axis: the two neighbouring pixels (or -1
// when outside) and the weight of the upper one.
struct Taps {
  int lo = -1;
  int hi = -1;
  double w = 0.0;
};

Taps make_taps(double c, int n) {
  Taps t;
  const double f = index_coord(c, n);
  if (!(f > -1.0 && f < static_cast<double>(n))) return t;
  const double fl = std::floor(f);
  const int i0 = static_cast<int>(fl);
  t.w = f - fl;
  t.lo = i0 >= 0 ? i0 : -1;
  t.hi = i0 + 1 < n ? i0 + 1 : -1;
  return t;
}

// Fills out (P*P entries, row-major, i = row along u) with raw samples.
template <typename T>
void fill_patch(std::span<const double> image, int det_u, int det_v, const Vec2& center, const PatchConfig& cfg,
                T* out, double offset, double scale) {
  const int h = cfg.half();
  const int p = cfg.size;
  Taps v_taps[64];
  std::vector<Taps> v_heap;
  Taps* vt = v_taps;
  if (p > 64) {
    v_heap.resize(static_cast<std::size_t>(p));
    vt = v_heap.data();
  }
  for (int j = -h; j <= h; ++j) vt[j + h] = make_taps(center.v - cfg.delta * j, det_v);
  for (int i = -h; i <= h; ++i) {
    const Taps ut = make_taps(center.u - cfg.delta * i, det_u);
    T* row = out + static_cast<std::size_t>(i + h) * p;
    for (int j = 0; j < p; ++j) {
      const Taps& t = vt[j];
      double value = 0.0;
      if ((ut.lo >= 0 || ut.hi >= 0) && (t.lo >= 0 || t.hi >= 0)) {
        auto at = [&](int iu, int iv) -> double {
          if (iu < 0 || iv < 0) return 0.0;
          return image[static_cast<std::size_t>(iv) * det_u + iu];
        };
        const double r0 = at(ut.lo, t.lo) * (1 - ut.w) + at(ut.hi, t.lo) * ut.w;
        const double r1 = at(ut.lo, t.hi) * (1 - ut.w) + at(ut.hi, t.hi) * ut.w;
        value = r0 * (1 - t.w) + r1 * t.w;
      }
      row[j] = static_cast<T>((value - offset) * scale);
    }
  }
}

}  // namespace

std::vector<double> extract_patch(const TiltSeries& filtered, std::size_t tilt_index, const Vec3& r,
                                  const PatchConfig& cfg) {
  cfg.validate();
  if (tilt_index >= filtered.tilt_count()) throw UsageError("tilt index out of range");
  std::vector<double> patch(cfg.patch_area());
  const Vec2 center = filtered.geometry().frame(tilt_index).to_detector(r);
  fill_patch(filtered.image(tilt_index), filtered.det_u(), filtered.det_v(), center, cfg, patch.data(), 0.0, 1.0);
  return patch;
}

FeatureExtractor::FeatureExtractor(const TiltSeries& filtered, const PatchConfig& cfg)
    : series_(&filtered), cfg_(cfg), dim_(cfg.feature_dim(filtered.tilt_count())) {
  cfg_.validate();
  if (filtered.kind() != SeriesKind::filtered) throw UsageError("patches are extracted from filtered series");
  frames_.resize(filtered.tilt_count());
  for (std::size_t n = 0; n < frames_.size(); ++n) frames_[n] = filtered.geometry().frame(n);
  if (cfg_.normalize == PatchNormalization::per_series_zscore) {
    const auto data = filtered.data();
    double sum = 0.0;
    for (double x : data) sum += x;
    mean_ = sum / static_cast<double>(data.size());
    double var = 0.0;
    for (double x : data) var += (x - mean_) * (x - mean_);
    var /= static_cast<double>(data.size());
    if (!(var > 0.0)) throw NumericalError("degenerate normalization");
    inv_std_ = 1.0 / std::sqrt(var);
  }
}

void FeatureExtractor::extract(const Vec3& r, std::span<float> out) const {
  const std::size_t area = cfg_.patch_area();
  for (std::size_t n = 0; n < frames_.size(); ++n) {
    fill_patch(series_->image(n), series_->det_u(), series_->det_v(), frames_[n].to_detector(r), cfg_,
               out.data() + n * area, mean_, inv_std_);
  }
}

FeatureVector FeatureExtractor::extract(const Vec3& r) const {
  FeatureVector fv;
  fv.values.resize(dim_);
  extract(r, fv.values);
  return fv;
}

FeatureVector assemble_features(const TiltSeries& filtered, const Vec3& r, const PatchConfig& cfg) {
  return FeatureExtractor(filtered, cfg).extract(r);
}

}  // namespace loctomo
