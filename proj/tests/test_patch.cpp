#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "loctomo/error.hpp"
#include "loctomo/patch.hpp"
#include "oracles.hpp"

using namespace loctomo;
using Catch::Approx;

namespace {

TiltSeries filtered_from(const TiltGeometry& geom, int det_u, int det_v, auto&& f) {
  TiltSeries ts(geom, det_u, det_v, SeriesKind::filtered);
  for (std::size_t n = 0; n < geom.size(); ++n)
    for (int iv = 0; iv < det_v; ++iv)
      for (int iu = 0; iu < det_u; ++iu) ts(n, iu, iv) = f(n, iu, iv);
  return ts;
}

TiltSeries random_filtered(const TiltGeometry& geom, int det_u, int det_v, std::uint64_t seed) {
  Rng rng(seed);
  return filtered_from(geom, det_u, det_v, [&](std::size_t, int, int) { return rng.uniform(-1, 1); });
}

PatchConfig raw_config(int size, double delta) {
  PatchConfig cfg;
  cfg.size = size;
  cfg.delta = delta;
  cfg.normalize = PatchNormalization::none;
  return cfg;
}

}  // namespace

TEST_CASE("patch of a constant projection is constant", "[patch]") {
  const TiltSeries ts = filtered_from(TiltGeometry({-40.0, 25.0}), 32, 32, [](std::size_t, int, int) { return 1.75; });
  const PatchConfig cfg = raw_config(7, 1.5);
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const Vec3 r{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)};
    for (std::size_t n = 0; n < 2; ++n)
      for (double x : extract_patch(ts, n, r, cfg)) CHECK(x == Approx(1.75).epsilon(1e-14));
  }
}

TEST_CASE("patch of a linear ramp is exact", "[patch]") {
  const int det = 40;
  const TiltSeries ts = filtered_from(TiltGeometry({30.0}), det, det,
                                      [&](std::size_t, int iu, int) { return centered_coord(iu, det); });
  for (double delta : {1.0, 0.75, 1.3}) {
    const PatchConfig cfg = raw_config(9, delta);
    const Vec3 r{2.3, -1.1, 3.7};
    const Vec2 d = world_to_detector(r, 30.0);
    const auto patch = extract_patch(ts, 0, r, cfg);
    for (int i = -4; i <= 4; ++i)
      for (int j = -4; j <= 4; ++j) CHECK(patch[(i + 4) * 9 + (j + 4)] == Approx(d.u - delta * i).margin(1e-12));
  }
}

TEST_CASE("patch center matches direct detector sampling", "[patch]") {
  const TiltGeometry geom({-60.0, 7.5, 48.0});
  const TiltSeries ts = random_filtered(geom, 64, 64, 2);
  const PatchConfig cfg = raw_config(11, 1.0);
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const Vec3 r{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)};
    const std::size_t n = rng.below(3);
    const auto [u, v] = oracle::world_to_detector(r.x, r.y, r.z, geom.angle_deg(n));
    const auto img = ts.image(n);
    const double expected =
        oracle::bilinear({img.begin(), img.end()}, 64, 64, static_cast<double>(u), static_cast<double>(v));
    CHECK(extract_patch(ts, n, r, cfg)[5 * 11 + 5] == Approx(expected).margin(1e-12));
  }
}

TEST_CASE("zero-tilt unit-spacing patches are detector windows", "[patch][property]") {
  const int nu = 21, nv = 17;
  const TiltSeries ts = random_filtered(TiltGeometry({0.0}), nu, nv, 4);
  const PatchConfig cfg = raw_config(5, 1.0);
  for (int iu0 = 2; iu0 < nu - 2; iu0 += 3)
    for (int iv0 = 2; iv0 < nv - 2; iv0 += 3) {
      const Vec3 r{centered_coord(iu0, nu), centered_coord(iv0, nv), 5.0};
      const auto patch = extract_patch(ts, 0, r, cfg);
      for (int i = -2; i <= 2; ++i)
        for (int j = -2; j <= 2; ++j) CHECK(patch[(i + 2) * 5 + (j + 2)] == ts(0, iu0 - i, iv0 - j));
    }
}

TEST_CASE("moving the voxel along u shifts the patch rows", "[patch][property]") {
  const double theta = 35.0, delta = 1.25;
  const TiltSeries ts = random_filtered(TiltGeometry({theta}), 48, 48, 5);
  const PatchConfig cfg = raw_config(7, delta);
  const double c = std::cos(theta * std::numbers::pi / 180.0), s = std::sin(theta * std::numbers::pi / 180.0);
  const Vec3 r{1.3, 2.2, -0.7};
  const auto base = extract_patch(ts, 0, r, cfg);
  for (int k : {-2, 1, 3}) {
    const Vec3 moved{r.x + k * delta * c, r.y, r.z - k * delta * s};
    const auto shifted = extract_patch(ts, 0, moved, cfg);
    for (int i = -3; i <= 3; ++i) {
      if (i - k < -3 || i - k > 3) continue;
      for (int j = 0; j < 7; ++j) CHECK(shifted[(i + 3) * 7 + j] == Approx(base[(i - k + 3) * 7 + j]).margin(1e-10));
    }
  }
}

TEST_CASE("feature assembly order and length", "[patch]") {
  const TiltGeometry geom({-20.0, 0.0, 20.0});
  const TiltSeries ts = random_filtered(geom, 24, 24, 6);
  const PatchConfig cfg = raw_config(5, 1.0);
  const Vec3 r{1.5, -2.0, 0.5};
  const FeatureVector fv = assemble_features(ts, r, cfg);
  REQUIRE(fv.values.size() == 3u * 25);
  for (std::size_t n = 0; n < 3; ++n) {
    const auto patch = extract_patch(ts, n, r, cfg);
    for (std::size_t k = 0; k < 25; ++k) CHECK(fv.values[n * 25 + k] == static_cast<float>(patch[k]));
  }

  const TiltSeries one = random_filtered(TiltGeometry({10.0}), 24, 24, 7);
  const FeatureVector single = assemble_features(one, r, cfg);
  const auto patch = extract_patch(one, 0, r, cfg);
  REQUIRE(single.values.size() == 25);
  for (std::size_t k = 0; k < 25; ++k) CHECK(single.values[k] == static_cast<float>(patch[k]));

  const TiltSeries zero(geom, 24, 24, SeriesKind::filtered);
  const FeatureVector z = assemble_features(zero, r, raw_config(11, 1.0));
  CHECK(z.values.size() == 3u * 121);
  for (float x : z.values) CHECK(x == 0.0f);
}

TEST_CASE("per-series z-score uses the global statistics", "[patch]") {
  const TiltGeometry geom({-15.0, 15.0});
  const TiltSeries ts = random_filtered(geom, 20, 20, 8);
  PatchConfig cfg = raw_config(3, 1.0);
  cfg.normalize = PatchNormalization::per_series_zscore;
  const auto all = ts.data();
  const std::vector<double> values(all.begin(), all.end());
  const double m = oracle::mean(values), sd = oracle::stddev(values);
  const Vec3 r{0.3, 0.4, -1.0};
  const FeatureExtractor fx(ts, cfg);
  CHECK(fx.dim() == 18);
  const FeatureVector fv = fx.extract(r);
  for (std::size_t n = 0; n < 2; ++n) {
    const auto patch = extract_patch(ts, n, r, cfg);
    for (std::size_t k = 0; k < 9; ++k) CHECK(fv.values[n * 9 + k] == Approx((patch[k] - m) / sd).margin(1e-6));
  }

  const TiltSeries flat = filtered_from(geom, 8, 8, [](std::size_t, int, int) { return 2.0; });
  try {
    FeatureExtractor bad(flat, cfg);
    FAIL("expected an error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("degenerate normalization") != std::string::npos);
  }
}

TEST_CASE("patch preconditions", "[patch]") {
  CHECK_THROWS_AS(raw_config(4, 1.0).validate(), UsageError);
  CHECK_THROWS_AS(raw_config(0, 1.0).validate(), UsageError);
  CHECK_THROWS_AS(raw_config(5, 0.0).validate(), UsageError);
  const TiltSeries raw(TiltGeometry({0.0}), 8, 8, SeriesKind::noisy);
  CHECK_THROWS_AS(FeatureExtractor(raw, raw_config(3, 1.0)), UsageError);
  const TiltSeries f = random_filtered(TiltGeometry({0.0}), 8, 8, 1);
  CHECK_THROWS_AS(extract_patch(f, 1, {0, 0, 0}, raw_config(3, 1.0)), UsageError);
  CHECK(parse_patch_normalization(to_string(PatchNormalization::per_series_zscore)) ==
        PatchNormalization::per_series_zscore);
}
