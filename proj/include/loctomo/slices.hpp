#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "loctomo/volume.hpp"

namespace loctomo {

struct Gray8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

enum class SlicePlane { xy, xz, yz };

/// Central plane of the volume, contrast-stretched between its 1st and 99th
/// percentiles (mid-gray when they coincide). xz and yz images have z as rows.
Gray8 render_slice(const Volume& volume, SlicePlane plane);

void write_png(const std::filesystem::path& path, const Gray8& image);
Gray8 read_png(const std::filesystem::path& path);

/// Writes xy.png, xz.png and yz.png into dir.
void write_orthoslices(const Volume& volume, const std::filesystem::path& dir);

}  // namespace loctomo
