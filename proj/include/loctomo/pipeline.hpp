#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loctomo/filtering.hpp"
#include "loctomo/mlp.hpp"
#include "loctomo/patch.hpp"
#include "loctomo/random.hpp"
#include "loctomo/volume.hpp"

namespace loctomo {

enum class LrSchedule { constant, cosine_decay };
enum class TargetNormalization { none, per_volume_zscore };

std::string_view to_string(LrSchedule s);
LrSchedule parse_lr_schedule(std::string_view name);
std::string_view to_string(TargetNormalization t);
TargetNormalization parse_target_normalization(std::string_view name);

struct TrainConfig {
  PatchConfig patch;
  /// input_dim may be left at 0; it is then derived as N * P^2.
  MlpArch arch;
  AdamConfig adam;
  int steps = 20000;
  int batch_size = 1024;
  LrSchedule schedule = LrSchedule::constant;
  std::uint64_t seed = 0;
  /// Fraction of each training volume's interior voxels held out for model selection.
  double val_fraction = 0.1;
  /// Voxels excluded along every border; negative selects ceil(delta (P-1)/2) + 1.
  int margin = -1;
  TargetNormalization target_norm = TargetNormalization::per_volume_zscore;
  int val_interval = 100;
  /// Cap on the validation set size (voxels over all pairs).
  int val_max_voxels = 1024;

  int effective_margin() const;
  double learning_rate(int step) const;
  /// Architecture with input_dim resolved for tilt_count tilts. Throws
  /// DataError if a preset input_dim disagrees.
  MlpArch resolved_arch(std::size_t tilt_count) const;
  void validate() const;
};

struct TrainingPair {
  Volume reference;
  TiltSeries measurements;  // filtered
  std::string id;
};

/// Maps network outputs back to volume units: value = offset + scale * f.
struct TargetAffine {
  double scale = 1.0;
  double offset = 0.0;
  bool operator==(const TargetAffine&) const = default;
};

/// A trained network together with everything needed to apply it.
struct Model {
  MlpParams<float> params;
  PatchConfig patch;
  std::size_t tilt_count = 0;
  TargetAffine target;

  /// Throws DataError naming both tilt counts (or dimensions) on mismatch.
  void check_compatible(const TiltSeries& series) const;
};

struct Minibatch {
  std::vector<FeatureVector> features;
  std::vector<double> targets;
  std::vector<std::size_t> pair_index;
  std::vector<std::array<int, 3>> voxels;
};

/// Draws cfg.batch_size (pair, voxel) samples: the pair uniformly, then a
/// voxel uniformly among that pair's interior training voxels. Targets are raw
/// reference values. Throws UsageError for an empty list or when the margin
/// leaves no interior voxel.
Minibatch sample_minibatch(std::span<const TrainingPair> pairs, const TrainConfig& cfg, Rng& rng);

struct LogRow {
  int step = 0;
  double train_mse = 0.0;
  std::optional<double> val_mse;
  double lr = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<LogRow> log;
  int best_step = 0;
};

/// Parameters a training run starts from, deterministic in cfg.seed.
MlpParams<float> initial_params(const MlpArch& arch, const TrainConfig& cfg);

using ProgressFn = std::function<void(const LogRow&)>;

/// Minimizes the mean squared error between network outputs and reference
/// voxels with Adam. Returns the parameters with the best validation MSE (the
/// final ones when val_fraction is 0). Throws DataError when pairs disagree on
/// tilt count or detector shape.
TrainResult train(std::span<const TrainingPair> pairs, const TrainConfig& cfg, const ProgressFn& progress = {});

/// Same loop on one fixed batch drawn once up front (descent diagnostics).
TrainResult train_fixed_batch(std::span<const TrainingPair> pairs, const TrainConfig& cfg);

void write_training_log(const std::filesystem::path& path, std::span<const LogRow> log);

/// Sub-box of a grid, in voxel indices.
struct VoxelBox {
  int x0 = 0, y0 = 0, z0 = 0;
  int nx = 0, ny = 0, nz = 0;

  static VoxelBox whole(const GridSpec& g) { return {0, 0, 0, g.nx, g.ny, g.nz}; }
};

/// Voxel-wise reconstruction: ramp-filters the measurements (unless already
/// filtered), then evaluates the network on each voxel's feature vector,
/// chunk_size voxels at a time. Bitwise independent of chunk_size.
Volume reconstruct(const TiltSeries& measurements, const Model& model, const GridSpec& grid,
                   std::size_t chunk_size = 4096, const FilterSpec& filter = {});

/// Reconstructs only `box` of `grid`; equal bitwise to that box of the full
/// reconstruction.
Volume reconstruct_region(const TiltSeries& measurements, const Model& model, const GridSpec& grid,
                          const VoxelBox& box, std::size_t chunk_size = 4096, const FilterSpec& filter = {});

}  // namespace loctomo
