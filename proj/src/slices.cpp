#include "loctomo/slices.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "loctomo/error.hpp"

namespace loctomo {

namespace {

double percentile(std::vector<double> values, double q) {
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(values.size() - 1)));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

Gray8 render_slice(const Volume& volume, SlicePlane plane) {
  const GridSpec& g = volume.grid();
  Gray8 img;
  std::vector<double> values;
  switch (plane) {
    case SlicePlane::xy:
      img.width = g.nx;
      img.height = g.ny;
      for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) values.push_back(volume(ix, iy, g.nz / 2));
      break;
    case SlicePlane::xz:
      img.width = g.nx;
      img.height = g.nz;
      for (int iz = 0; iz < g.nz; ++iz)
        for (int ix = 0; ix < g.nx; ++ix) values.push_back(volume(ix, g.ny / 2, iz));
      break;
    case SlicePlane::yz:
      img.width = g.ny;
      img.height = g.nz;
      for (int iz = 0; iz < g.nz; ++iz)
        for (int iy = 0; iy < g.ny; ++iy) values.push_back(volume(g.nx / 2, iy, iz));
      break;
  }
  const double lo = percentile(values, 0.01);
  const double hi = percentile(values, 0.99);
  img.pixels.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(hi > lo)) {
      img.pixels[i] = 128;
      continue;
    }
    const double t = std::clamp((values[i] - lo) / (hi - lo), 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * t));
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Gray8& image) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int row = 0; row < image.height; ++row) {
    png_write_row(png, image.pixels.data() + static_cast<std::size_t>(row) * image.width);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Gray8 read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) throw DataError("cannot read PNG " + path.string());
  img.format = PNG_FORMAT_GRAY;
  Gray8 out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DataError("cannot decode PNG " + path.string());
  }
  return out;
}

void write_orthoslices(const Volume& volume, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_png(dir / "xy.png", render_slice(volume, SlicePlane::xy));
  write_png(dir / "xz.png", render_slice(volume, SlicePlane::xz));
  write_png(dir / "yz.png", render_slice(volume, SlicePlane::yz));
}

}  // namespace loctomo
