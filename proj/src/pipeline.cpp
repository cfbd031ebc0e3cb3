#include "loctomo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include "loctomo/error.hpp"

namespace loctomo {

std::string_view to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine_decay"; }

LrSchedule parse_lr_schedule(std::string_view name) {
  if (name == "constant") return LrSchedule::constant;
  if (name == "cosine_decay") return LrSchedule::cosine_decay;
  throw UsageError("unknown learning-rate schedule '" + std::string(name) + "'");
}

std::string_view to_string(TargetNormalization t) {
  return t == TargetNormalization::none ? "none" : "per_volume_zscore";
}

TargetNormalization parse_target_normalization(std::string_view name) {
  if (name == "none") return TargetNormalization::none;
  if (name == "per_volume_zscore") return TargetNormalization::per_volume_zscore;
  throw UsageError("unknown target normalization '" + std::string(name) + "'");
}

int TrainConfig::effective_margin() const {
  if (margin >= 0) return margin;
  return static_cast<int>(std::ceil(patch.delta * (patch.size - 1) / 2.0)) + 1;
}

double TrainConfig::learning_rate(int step) const {
  if (schedule == LrSchedule::constant) return adam.lr;
  const double progress = static_cast<double>(step - 1) / std::max(1, steps);
  return adam.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

MlpArch TrainConfig::resolved_arch(std::size_t tilt_count) const {
  MlpArch a = arch;
  const std::size_t dim = patch.feature_dim(tilt_count);
  if (a.input_dim != 0 && a.input_dim != dim) {
    throw DataError("network input dimension " + std::to_string(a.input_dim) + " does not match " +
                    std::to_string(tilt_count) + " tilts x " + std::to_string(patch.patch_area()) + " = " +
                    std::to_string(dim));
  }
  a.input_dim = dim;
  return a;
}

void TrainConfig::validate() const {
  patch.validate();
  if (steps < 1) throw UsageError("training needs at least one step");
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw UsageError("val_fraction must lie in [0, 1)");
  if (val_interval < 1) throw UsageError("validation interval must be at least 1");
  if (!(adam.lr > 0.0)) throw UsageError("learning rate must be positive");
}

void Model::check_compatible(const TiltSeries& series) const {
  if (series.tilt_count() != tilt_count) {
    throw DataError("model expects " + std::to_string(tilt_count) + " tilts, series has " +
                    std::to_string(series.tilt_count()));
  }
  const std::size_t dim = patch.feature_dim(series.tilt_count());
  if (dim != params.arch().input_dim) {
    throw DataError("model input dimension " + std::to_string(params.arch().input_dim) +
                    " does not match feature dimension " + std::to_string(dim));
  }
}

namespace {

// A training pair with its extractor, the shuffled split of interior voxels
// and its target normalization.
struct PreparedPair {
  const TrainingPair* pair = nullptr;
  FeatureExtractor extractor;
  std::vector<std::uint32_t> train_voxels;
  std::vector<std::uint32_t> val_voxels;
  double target_mean = 0.0;
  double target_scale = 1.0;  // target = (value - mean) / scale
};

std::array<int, 3> unravel(const GridSpec& g, std::uint32_t idx) {
  const int ix = static_cast<int>(idx % static_cast<std::uint32_t>(g.nx));
  const std::uint32_t rest = idx / static_cast<std::uint32_t>(g.nx);
  return {ix, static_cast<int>(rest % static_cast<std::uint32_t>(g.ny)),
          static_cast<int>(rest / static_cast<std::uint32_t>(g.ny))};
}

void check_pairs(std::span<const TrainingPair> pairs) {
  if (pairs.empty()) throw UsageError("no training pairs");
  const TrainingPair& first = pairs.front();
  for (const TrainingPair& p : pairs) {
    if (p.measurements.kind() != SeriesKind::filtered) {
      throw UsageError("training pair '" + p.id + "' holds unfiltered measurements");
    }
    if (p.measurements.tilt_count() != first.measurements.tilt_count()) {
      throw DataError("training pair '" + p.id + "' has " + std::to_string(p.measurements.tilt_count()) +
                      " tilts, expected " + std::to_string(first.measurements.tilt_count()));
    }
    if (p.measurements.det_u() != first.measurements.det_u() || p.measurements.det_v() != first.measurements.det_v()) {
      throw DataError("training pair '" + p.id + "' has a different detector shape");
    }
    if (p.measurements.det_v() != p.reference.grid().ny) {
      throw DataError("training pair '" + p.id + "': detector rows must match reference ny");
    }
  }
}

std::vector<PreparedPair> prepare(std::span<const TrainingPair> pairs, const TrainConfig& cfg) {
  check_pairs(pairs);
  const int margin = cfg.effective_margin();
  std::vector<PreparedPair> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const TrainingPair& p = pairs[i];
    const GridSpec& g = p.reference.grid();
    PreparedPair prep{&p, FeatureExtractor(p.measurements, cfg.patch), {}, {}, 0.0, 1.0};
    std::vector<std::uint32_t> eligible;
    for (int iz = margin; iz < g.nz - margin; ++iz) {
      for (int iy = margin; iy < g.ny - margin; ++iy) {
        for (int ix = margin; ix < g.nx - margin; ++ix) {
          eligible.push_back(static_cast<std::uint32_t>(g.linear_index(ix, iy, iz)));
        }
      }
    }
    if (eligible.empty()) {
      throw UsageError("margin " + std::to_string(margin) + " leaves no interior voxels in pair '" + p.id + "'");
    }
    const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(eligible.size())));
    if (n_val > 0) {
      Rng shuffle(derive_seed(cfg.seed, {0x76616cULL, i}));
      for (std::size_t k = eligible.size() - 1; k > 0; --k) std::swap(eligible[k], eligible[shuffle.below(k + 1)]);
      if (n_val >= eligible.size()) throw UsageError("validation split leaves no training voxels");
    }
    prep.val_voxels.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(n_val));
    prep.train_voxels.assign(eligible.begin() + static_cast<std::ptrdiff_t>(n_val), eligible.end());

    if (cfg.target_norm == TargetNormalization::per_volume_zscore) {
      const auto data = p.reference.data();
      double sum = 0.0;
      for (double x : data) sum += x;
      const double mean = sum / static_cast<double>(data.size());
      double var = 0.0;
      for (double x : data) var += (x - mean) * (x - mean);
      var /= static_cast<double>(data.size());
      if (!(var > 0.0)) throw NumericalError("reference volume '" + p.id + "' is constant");
      prep.target_mean = mean;
      prep.target_scale = std::sqrt(var);
    }
    out.push_back(std::move(prep));
  }
  return out;
}

struct Draw {
  std::size_t pair;
  std::uint32_t voxel;
};

std::vector<Draw> draw_samples(const std::vector<PreparedPair>& prepared, int count, Rng& rng) {
  std::vector<Draw> draws(static_cast<std::size_t>(count));
  for (auto& d : draws) {
    d.pair = static_cast<std::size_t>(rng.below(prepared.size()));
    const auto& voxels = prepared[d.pair].train_voxels;
    d.voxel = voxels[rng.below(voxels.size())];
  }
  return draws;
}

// Fills one column per draw with features and the normalized target.
void assemble(const std::vector<PreparedPair>& prepared, std::span<const Draw> draws, ColMatrix<float>& x,
              std::vector<float>& targets) {
  const Eigen::Index dim = static_cast<Eigen::Index>(prepared.front().extractor.dim());
  x.resize(dim, static_cast<Eigen::Index>(draws.size()));
  targets.resize(draws.size());
  const long count = static_cast<long>(draws.size());
#pragma omp parallel for schedule(static)
  for (long s = 0; s < count; ++s) {
    const PreparedPair& pp = prepared[draws[s].pair];
    const GridSpec& g = pp.pair->reference.grid();
    const auto [ix, iy, iz] = unravel(g, draws[s].voxel);
    pp.extractor.extract(g.centered(ix, iy, iz), std::span<float>(x.col(s).data(), static_cast<std::size_t>(dim)));
    targets[s] = static_cast<float>((pp.pair->reference.data()[draws[s].voxel] - pp.target_mean) / pp.target_scale);
  }
}

TargetAffine pooled_affine(const std::vector<PreparedPair>& prepared) {
  TargetAffine a{0.0, 0.0};
  for (const auto& p : prepared) {
    a.scale += p.target_scale;
    a.offset += p.target_mean;
  }
  a.scale /= static_cast<double>(prepared.size());
  a.offset /= static_cast<double>(prepared.size());
  return a;
}

struct ValidationSet {
  std::vector<float> rows;  // padded to the inference stride
  std::vector<float> targets;
};

ValidationSet build_validation(const std::vector<PreparedPair>& prepared, const TrainConfig& cfg, std::size_t stride) {
  std::vector<Draw> draws;
  const std::size_t cap = static_cast<std::size_t>(std::max(0, cfg.val_max_voxels));
  // Round-robin over pairs so every volume is represented.
  for (std::size_t k = 0; draws.size() < cap; ++k) {
    bool any = false;
    for (std::size_t p = 0; p < prepared.size() && draws.size() < cap; ++p) {
      if (k < prepared[p].val_voxels.size()) {
        draws.push_back({p, prepared[p].val_voxels[k]});
        any = true;
      }
    }
    if (!any) break;
  }
  ValidationSet v;
  if (draws.empty()) return v;
  ColMatrix<float> x;
  assemble(prepared, draws, x, v.targets);
  v.rows.assign(draws.size() * stride, 0.0f);
  for (std::size_t s = 0; s < draws.size(); ++s) {
    std::copy_n(x.col(static_cast<Eigen::Index>(s)).data(), x.rows(), v.rows.data() + s * stride);
  }
  return v;
}

double validation_mse(const MlpParams<float>& params, const ValidationSet& v) {
  const InferenceNet<float> net(params);
  std::vector<float> out(v.targets.size());
  net.forward(v.rows, v.targets.size(), out);
  double sum = 0.0;
  for (std::size_t s = 0; s < out.size(); ++s) {
    const double e = static_cast<double>(out[s]) - v.targets[s];
    sum += e * e;
  }
  return sum / static_cast<double>(out.size());
}

TrainResult run_training(std::span<const TrainingPair> pairs, const TrainConfig& cfg, bool fixed_batch,
                         const ProgressFn& progress) {
  cfg.validate();
  auto prepared = prepare(pairs, cfg);
  const std::size_t tilts = pairs.front().measurements.tilt_count();
  const MlpArch arch = cfg.resolved_arch(tilts);

  MlpParams<float> params = initial_params(arch, cfg);
  AdamState<float> state = AdamState<float>::init(arch, cfg.adam);
  Rng rng(derive_seed(cfg.seed, {0x7472616eULL}));

  const ValidationSet val =
      cfg.val_fraction > 0.0 ? build_validation(prepared, cfg, InferenceNet<float>::padded(arch.input_dim))
                             : ValidationSet{};

  TrainResult result;
  result.model.patch = cfg.patch;
  result.model.tilt_count = tilts;
  result.model.target =
      cfg.target_norm == TargetNormalization::per_volume_zscore ? pooled_affine(prepared) : TargetAffine{};
  result.log.reserve(static_cast<std::size_t>(cfg.steps));

  ColMatrix<float> x;
  std::vector<float> targets;
  if (fixed_batch) {
    const auto draws = draw_samples(prepared, cfg.batch_size, rng);
    assemble(prepared, draws, x, targets);
  }

  double best_val = std::numeric_limits<double>::infinity();
  MlpParams<float> best = params;
  result.best_step = 0;
  for (int step = 1; step <= cfg.steps; ++step) {
    if (!fixed_batch) {
      const auto draws = draw_samples(prepared, cfg.batch_size, rng);
      assemble(prepared, draws, x, targets);
    }
    const double lr = cfg.learning_rate(step);
    auto lg = mlp_backward<float>(params, x, targets);
    if (!std::isfinite(lg.loss)) throw NumericalError("training loss diverged at step " + std::to_string(step));
    adam_step(params, lg.gradients, state, lr);

    LogRow row{step, lg.loss, std::nullopt, lr};
    if (!val.targets.empty() && (step % cfg.val_interval == 0 || step == cfg.steps)) {
      const double mse = validation_mse(params, val);
      row.val_mse = mse;
      if (mse < best_val) {
        best_val = mse;
        best = params;
        result.best_step = step;
      }
    }
    if (progress) progress(row);
    result.log.push_back(row);
  }
  if (!params.all_finite()) throw NumericalError("training produced non-finite parameters");
  result.model.params = val.targets.empty() ? std::move(params) : std::move(best);
  if (val.targets.empty()) result.best_step = cfg.steps;
  return result;
}

}  // namespace

MlpParams<float> initial_params(const MlpArch& arch, const TrainConfig& cfg) {
  return MlpParams<float>::kaiming_uniform(arch, derive_seed(cfg.seed, {0x696e6974ULL}));
}

Minibatch sample_minibatch(std::span<const TrainingPair> pairs, const TrainConfig& cfg, Rng& rng) {
  const auto prepared = prepare(pairs, cfg);
  const auto draws = draw_samples(prepared, cfg.batch_size, rng);
  Minibatch mb;
  for (const Draw& d : draws) {
    const PreparedPair& pp = prepared[d.pair];
    const GridSpec& g = pp.pair->reference.grid();
    const auto v = unravel(g, d.voxel);
    mb.features.push_back(pp.extractor.extract(g.centered(v[0], v[1], v[2])));
    mb.targets.push_back(pp.pair->reference.data()[d.voxel]);
    mb.pair_index.push_back(d.pair);
    mb.voxels.push_back(v);
  }
  return mb;
}

TrainResult train(std::span<const TrainingPair> pairs, const TrainConfig& cfg, const ProgressFn& progress) {
  return run_training(pairs, cfg, false, progress);
}

TrainResult train_fixed_batch(std::span<const TrainingPair> pairs, const TrainConfig& cfg) {
  return run_training(pairs, cfg, true, {});
}

void write_training_log(const std::filesystem::path& path, std::span<const LogRow> log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write training log " + path.string());
  out << "step,train_mse,val_mse,lr\n";
  char buf[128];
  for (const LogRow& r : log) {
    if (r.val_mse) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.step, r.train_mse, *r.val_mse, r.lr);
    } else {
      std::snprintf(buf, sizeof buf, "%d,%.17g,,%.17g\n", r.step, r.train_mse, r.lr);
    }
    out << buf;
  }
  if (!out) throw DataError("failed writing training log " + path.string());
}

Volume reconstruct_region(const TiltSeries& measurements, const Model& model, const GridSpec& grid,
                          const VoxelBox& box, std::size_t chunk_size, const FilterSpec& filter) {
  if (chunk_size < 1) throw UsageError("chunk size must be at least 1");
  model.check_compatible(measurements);
  if (measurements.det_v() != grid.ny) {
    throw DataError("detector rows (" + std::to_string(measurements.det_v()) + ") must match grid ny (" +
                    std::to_string(grid.ny) + ")");
  }
  if (box.x0 < 0 || box.y0 < 0 || box.z0 < 0 || box.nx < 1 || box.ny < 1 || box.nz < 1 ||
      box.x0 + box.nx > grid.nx || box.y0 + box.ny > grid.ny || box.z0 + box.nz > grid.nz) {
    throw UsageError("reconstruction box lies outside the grid");
  }
  const TiltSeries filtered =
      measurements.kind() == SeriesKind::filtered ? measurements : ramp_filter(measurements, filter);
  const FeatureExtractor extractor(filtered, model.patch);
  const InferenceNet<float> net(model.params);
  const std::size_t stride = net.input_stride();
  const std::size_t dim = extractor.dim();

  GridSpec out_grid{box.nx, box.ny, box.nz, grid.voxel_size};
  Volume out(out_grid);
  auto out_data = out.data();
  const std::size_t total = out_grid.voxel_count();
  const std::size_t chunk = std::min(chunk_size, total);
  std::vector<float> rows(chunk * stride, 0.0f);
  std::vector<float> values(chunk);

  for (std::size_t first = 0; first < total; first += chunk) {
    const std::size_t n = std::min(chunk, total - first);
    const long count = static_cast<long>(n);
#pragma omp parallel for schedule(static)
    for (long s = 0; s < count; ++s) {
      const auto [bx, by, bz] = unravel(out_grid, static_cast<std::uint32_t>(first + static_cast<std::size_t>(s)));
      const Vec3 r = grid.centered(box.x0 + bx, box.y0 + by, box.z0 + bz);
      extractor.extract(r, std::span<float>(rows.data() + static_cast<std::size_t>(s) * stride, dim));
    }
    const long groups = static_cast<long>((n + InferenceNet<float>::kGroup - 1) / InferenceNet<float>::kGroup);
#pragma omp parallel for schedule(static)
    for (long gidx = 0; gidx < groups; ++gidx) {
      const std::size_t g0 = static_cast<std::size_t>(gidx) * InferenceNet<float>::kGroup;
      const std::size_t gn = std::min(InferenceNet<float>::kGroup, n - g0);
      net.forward(std::span<const float>(rows.data() + g0 * stride, gn * stride), gn,
                  std::span<float>(values.data() + g0, gn));
    }
    for (std::size_t s = 0; s < n; ++s) {
      out_data[first + s] = model.target.offset + model.target.scale * static_cast<double>(values[s]);
    }
  }
  require_finite(out.data(), "reconstruction");
  return out;
}

Volume reconstruct(const TiltSeries& measurements, const Model& model, const GridSpec& grid, std::size_t chunk_size,
                   const FilterSpec& filter) {
  return reconstruct_region(measurements, model, grid, VoxelBox::whole(grid), chunk_size, filter);
}

}  // namespace loctomo
