#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "loctomo/pipeline.hpp"
#include "loctomo/volume.hpp"

namespace loctomo {

/// The MRC2014 header fields this library reads and writes. Only mode 2
/// (32-bit float) is supported.
struct MrcHeader {
  std::int32_t nx = 0, ny = 0, nz = 0;
  std::int32_t mode = 2;
  std::array<float, 3> cell{0.0f, 0.0f, 0.0f};  // Angstrom
  std::int32_t ispg = 1;                       // 0 for image stacks, 1 for volumes
  float dmin = 0.0f, dmax = 0.0f, dmean = 0.0f, rms = 0.0f;
  bool big_endian = false;

  /// Pixel size along x recovered from the cell dimensions (1 when unset).
  double pixel_size() const { return nx > 0 && cell[0] > 0.0f ? static_cast<double>(cell[0]) / nx : 1.0; }
};

inline constexpr std::size_t kMrcHeaderBytes = 1024;

struct MrcFile {
  MrcHeader header;
  std::vector<float> data;  // x fastest, then y, then z (section)
};

/// Throws DataError: "unsupported MRC mode", "short read", bad identifiers.
MrcFile read_mrc(const std::filesystem::path& path);
/// Header statistics are recomputed from the data. Output bytes depend only
/// on the arguments.
void write_mrc(const std::filesystem::path& path, int nx, int ny, int nz, std::span<const float> data,
               double pixel_size, bool stack);

Volume read_volume(const std::filesystem::path& path);
/// Values are stored as 32-bit floats.
void write_volume(const std::filesystem::path& path, const Volume& volume);

/// Reads an image stack plus its angle sidecar; nz must equal the number of
/// angles. Loaded series are tagged noisy (measured data).
TiltSeries read_tilt_series(const std::filesystem::path& stack, const std::filesystem::path& angles);
/// Writes the stack and, when `angles` is non-empty, the sidecar.
void write_tilt_series(const std::filesystem::path& stack, const std::filesystem::path& angles, const TiltSeries& series);

/// One angle in degrees per line, in stack order. Blank lines and lines
/// starting with '#' are ignored.
TiltGeometry read_angles(const std::filesystem::path& path);
void write_angles(const std::filesystem::path& path, const TiltGeometry& geometry);

/// Fourier cropping of every projection to (det_u / factor) x (det_v / factor),
/// mean preserving. Throws UsageError unless factor >= 1 divides both sizes.
TiltSeries downsample_stack(const TiltSeries& series, int factor);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary ".lmlp" layout, little-endian:
///   "LMLP", u32 version, u32 input_dim, u32 n_hidden, u32 hidden[n_hidden],
///   u8 activation, u32 output_dim, u32 patch size, f64 delta, u8 normalize,
///   u32 tilt count, f64 target scale, f64 target offset, u64 param count,
///   f32 params (per layer: weights row-major, then bias).
void save_checkpoint(const std::filesystem::path& path, const Model& model);
/// Throws DataError: "not a checkpoint", "short read", version mismatch.
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace loctomo
