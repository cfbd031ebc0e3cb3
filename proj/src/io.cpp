#include "loctomo/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "fft.hpp"
#include "loctomo/error.hpp"

namespace loctomo {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap_value(T v) {
  std::array<unsigned char, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  std::reverse(b.begin(), b.end());
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

// Little-endian writer over a byte buffer.
class ByteWriter {
 public:
  explicit ByteWriter(std::vector<unsigned char>& buf) : buf_(buf) {}

  template <typename T>
  void put(T value) {
    if constexpr (std::endian::native == std::endian::big) value = byteswap_value(value);
    const auto* p = reinterpret_cast<const unsigned char*>(&value);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }

  template <typename T>
  void put_at(std::size_t offset, T value) {
    if constexpr (std::endian::native == std::endian::big) value = byteswap_value(value);
    std::memcpy(buf_.data() + offset, &value, sizeof(T));
  }

 private:
  std::vector<unsigned char>& buf_;
};

// Reader with explicit byte order and "short read" detection.
class ByteReader {
 public:
  ByteReader(const unsigned char* data, std::size_t size, bool big_endian)
      : data_(data), size_(size), big_(big_endian) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > size_) throw DataError("short read");
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    const bool swap = big_ != (std::endian::native == std::endian::big);
    return swap ? byteswap_value(v) : v;
  }

  template <typename T>
  T get_at(std::size_t offset) {
    const std::size_t saved = pos_;
    pos_ = offset;
    T v = get<T>();
    pos_ = saved;
    return v;
  }

  std::size_t remaining() const { return size_ - pos_; }
  std::size_t position() const { return pos_; }

 private:
  const unsigned char* data_;
  std::size_t size_;
  bool big_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void dump(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<float> to_float(std::span<const double> values, std::string_view what) {
  require_finite(values, what);
  std::vector<float> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

}  // namespace

MrcFile read_mrc(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() < kMrcHeaderBytes) throw DataError("short read: " + path.string() + " has no full MRC header");
  // Machine stamp 0x44 0x44 (or 0x44 0x41) is little-endian, 0x11 0x11 big-endian.
  bool big = bytes[212] == 0x11;
  if (bytes[212] != 0x44 && bytes[212] != 0x11) {
    // No usable stamp: pick the byte order giving a sane mode.
    ByteReader le(bytes.data(), bytes.size(), false);
    const auto mode = le.get_at<std::int32_t>(12);
    big = mode < 0 || mode > 16;
  }
  ByteReader r(bytes.data(), bytes.size(), big);
  MrcFile f;
  MrcHeader& h = f.header;
  h.big_endian = big;
  h.nx = r.get<std::int32_t>();
  h.ny = r.get<std::int32_t>();
  h.nz = r.get<std::int32_t>();
  h.mode = r.get<std::int32_t>();
  if (h.mode != 2) throw DataError("unsupported MRC mode " + std::to_string(h.mode) + " in " + path.string());
  if (h.nx < 1 || h.ny < 1 || h.nz < 1) throw DataError("MRC dimensions must be positive in " + path.string());
  for (int i = 0; i < 3; ++i) h.cell[i] = r.get_at<float>(40 + 4 * i);
  h.dmin = r.get_at<float>(76);
  h.dmax = r.get_at<float>(80);
  h.dmean = r.get_at<float>(84);
  h.ispg = r.get_at<std::int32_t>(88);
  const auto nsymbt = r.get_at<std::int32_t>(92);
  h.rms = r.get_at<float>(216);
  if (nsymbt < 0) throw DataError("negative extended header size in " + path.string());

  const std::size_t count = static_cast<std::size_t>(h.nx) * h.ny * h.nz;
  const std::size_t offset = kMrcHeaderBytes + static_cast<std::size_t>(nsymbt);
  if (bytes.size() < offset || (bytes.size() - offset) / 4 < count) {
    throw DataError("short read: " + path.string() + " holds fewer than " + std::to_string(count) + " values");
  }
  ByteReader body(bytes.data() + offset, bytes.size() - offset, big);
  f.data.resize(count);
  for (auto& v : f.data) v = body.get<float>();
  return f;
}

void write_mrc(const std::filesystem::path& path, int nx, int ny, int nz, std::span<const float> data,
               double pixel_size, bool stack) {
  const std::size_t count = static_cast<std::size_t>(nx) * ny * nz;
  if (data.size() != count) throw DataError("MRC data size does not match its dimensions");
  std::vector<unsigned char> bytes(kMrcHeaderBytes, 0);
  ByteWriter w(bytes);
  w.put_at<std::int32_t>(0, nx);
  w.put_at<std::int32_t>(4, ny);
  w.put_at<std::int32_t>(8, nz);
  w.put_at<std::int32_t>(12, 2);
  // nxstart, nystart, nzstart stay 0; sampling equals the dimensions.
  w.put_at<std::int32_t>(28, nx);
  w.put_at<std::int32_t>(32, ny);
  w.put_at<std::int32_t>(36, nz);
  const auto px = static_cast<float>(pixel_size);
  w.put_at<float>(40, px * static_cast<float>(nx));
  w.put_at<float>(44, px * static_cast<float>(ny));
  w.put_at<float>(48, px * static_cast<float>(nz));
  w.put_at<float>(52, 90.0f);
  w.put_at<float>(56, 90.0f);
  w.put_at<float>(60, 90.0f);
  w.put_at<std::int32_t>(64, 1);
  w.put_at<std::int32_t>(68, 2);
  w.put_at<std::int32_t>(72, 3);

  double lo = 0.0, hi = 0.0, sum = 0.0;
  if (!data.empty()) {
    lo = hi = data[0];
    for (float v : data) {
      lo = std::min(lo, static_cast<double>(v));
      hi = std::max(hi, static_cast<double>(v));
      sum += v;
    }
  }
  const double mean = data.empty() ? 0.0 : sum / static_cast<double>(data.size());
  double var = 0.0;
  for (float v : data) var += (v - mean) * (v - mean);
  const double rms = data.empty() ? 0.0 : std::sqrt(var / static_cast<double>(data.size()));
  w.put_at<float>(76, static_cast<float>(lo));
  w.put_at<float>(80, static_cast<float>(hi));
  w.put_at<float>(84, static_cast<float>(mean));
  w.put_at<std::int32_t>(88, stack ? 0 : 1);
  w.put_at<std::int32_t>(92, 0);
  std::memcpy(bytes.data() + 104, "MRCO", 4);
  w.put_at<std::int32_t>(108, 20140);
  std::memcpy(bytes.data() + 208, "MAP ", 4);
  bytes[212] = 0x44;
  bytes[213] = 0x44;
  w.put_at<float>(216, static_cast<float>(rms));
  w.put_at<std::int32_t>(220, 1);
  const std::string label = std::string("loctomo ") + LOCTOMO_VERSION;
  std::memcpy(bytes.data() + 224, label.data(), std::min<std::size_t>(label.size(), 80));

  bytes.reserve(kMrcHeaderBytes + 4 * count);
  for (float v : data) w.put(v);
  dump(path, bytes);
}

Volume read_volume(const std::filesystem::path& path) {
  MrcFile f = read_mrc(path);
  GridSpec g{f.header.nx, f.header.ny, f.header.nz, f.header.pixel_size()};
  std::vector<double> data(f.data.begin(), f.data.end());
  require_finite(data, path.string());
  return Volume(g, std::move(data));
}

void write_volume(const std::filesystem::path& path, const Volume& volume) {
  const auto data = to_float(volume.data(), "volume");
  const GridSpec& g = volume.grid();
  write_mrc(path, g.nx, g.ny, g.nz, data, g.voxel_size, false);
}

TiltGeometry read_angles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open angle file " + path.string());
  std::vector<double> angles;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    double value = 0.0;
    const char* begin = line.data() + first;
    const char* end = line.data() + last + 1;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": not an angle: '" + line + "'");
    }
    angles.push_back(value);
  }
  return TiltGeometry(std::move(angles));
}

void write_angles(const std::filesystem::path& path, const TiltGeometry& geometry) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write angle file " + path.string());
  char buf[64];
  for (double a : geometry.angles_deg()) {
    const auto res = std::to_chars(buf, buf + sizeof buf, a);
    out.write(buf, res.ptr - buf);
    out << '\n';
  }
  if (!out) throw DataError("failed writing angle file " + path.string());
}

TiltSeries read_tilt_series(const std::filesystem::path& stack, const std::filesystem::path& angles) {
  if (angles.empty() || !std::filesystem::exists(angles)) {
    throw DataError("missing angle sidecar for " + stack.string() +
                    (angles.empty() ? std::string() : " (expected " + angles.string() + ")"));
  }
  TiltGeometry geometry = read_angles(angles);
  MrcFile f = read_mrc(stack);
  if (static_cast<std::size_t>(f.header.nz) != geometry.size()) {
    throw DataError(stack.string() + " holds " + std::to_string(f.header.nz) + " images but " + angles.string() +
                    " lists " + std::to_string(geometry.size()) + " angles");
  }
  std::vector<double> data(f.data.begin(), f.data.end());
  require_finite(data, stack.string());
  return TiltSeries(std::move(geometry), f.header.nx, f.header.ny, SeriesKind::noisy, std::move(data),
                    f.header.pixel_size());
}

void write_tilt_series(const std::filesystem::path& stack, const std::filesystem::path& angles,
                       const TiltSeries& series) {
  const auto data = to_float(series.data(), "tilt series");
  write_mrc(stack, series.det_u(), series.det_v(), static_cast<int>(series.tilt_count()), data, series.pixel_size(),
            true);
  if (!angles.empty()) write_angles(angles, series.geometry());
}

namespace {

// Source bin for target bin k of a length-m axis cropped from length n, or -1
// for the dropped Nyquist bin of an even m.
int crop_source(int k, int m, int n) {
  const int freq = k <= m / 2 ? k : k - m;
  if (m % 2 == 0 && freq == m / 2) return -1;
  return freq >= 0 ? freq : freq + n;
}

}  // namespace

TiltSeries downsample_stack(const TiltSeries& series, int factor) {
  if (factor < 1) throw UsageError("downsampling factor must be at least 1");
  if (series.det_u() % factor != 0 || series.det_v() % factor != 0) {
    throw UsageError("downsampling factor " + std::to_string(factor) + " does not divide " +
                     std::to_string(series.det_u()) + "x" + std::to_string(series.det_v()));
  }
  if (factor == 1) return series;
  const int nu = series.det_u(), nv = series.det_v();
  const int mu = nu / factor, mv = nv / factor;
  TiltSeries out(series.geometry(), mu, mv, series.kind(), series.pixel_size() * factor);
  const std::array<int, 2> in_dims{nv, nu};
  const std::array<int, 2> out_dims{mv, mu};
  const int in_half = nu / 2 + 1, out_half = mu / 2 + 1;
  const double scale = 1.0 / (static_cast<double>(nu) * nv);

  for (std::size_t n = 0; n < series.tilt_count(); ++n) {
    std::vector<double> img(series.image(n).begin(), series.image(n).end());
    std::vector<fft::Complex> spec(static_cast<std::size_t>(nv) * in_half);
    fft::forward_r2c(in_dims, img.data(), spec.data());
    std::vector<fft::Complex> cropped(static_cast<std::size_t>(mv) * out_half, fft::Complex(0.0, 0.0));
    for (int kv = 0; kv < mv; ++kv) {
      const int sv = crop_source(kv, mv, nv);
      if (sv < 0) continue;
      for (int ku = 0; ku < out_half; ++ku) {
        if (mu % 2 == 0 && ku == mu / 2) continue;
        cropped[static_cast<std::size_t>(kv) * out_half + ku] = spec[static_cast<std::size_t>(sv) * in_half + ku] * scale;
      }
    }
    std::vector<double> small(static_cast<std::size_t>(mu) * mv);
    fft::inverse_c2r(out_dims, cropped.data(), small.data());
    std::copy(small.begin(), small.end(), out.image(n).begin());
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  const MlpArch& arch = model.params.arch();
  std::vector<unsigned char> bytes{'L', 'M', 'L', 'P'};
  ByteWriter w(bytes);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(arch.input_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(arch.hidden.size()));
  for (std::size_t h : arch.hidden) w.put<std::uint32_t>(static_cast<std::uint32_t>(h));
  w.put<std::uint8_t>(arch.activation == Activation::relu ? 0 : 1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(arch.output_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.patch.size));
  w.put<double>(model.patch.delta);
  w.put<std::uint8_t>(model.patch.normalize == PatchNormalization::none ? 0 : 1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.tilt_count));
  w.put<double>(model.target.scale);
  w.put<double>(model.target.offset);
  w.put<std::uint64_t>(model.params.param_count());
  model.params.visit([&](std::span<const float> block) {
    for (float v : block) w.put(v);
  });
  dump(path, bytes);
}

Model load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "LMLP", 4) != 0) {
    throw DataError("not a checkpoint: " + path.string());
  }
  ByteReader r(bytes.data() + 4, bytes.size() - 4, false);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  MlpArch arch;
  arch.input_dim = r.get<std::uint32_t>();
  const auto n_hidden = r.get<std::uint32_t>();
  if (n_hidden > 1024) throw DataError("implausible hidden layer count in " + path.string());
  arch.hidden.resize(n_hidden);
  for (auto& h : arch.hidden) h = r.get<std::uint32_t>();
  const auto act = r.get<std::uint8_t>();
  if (act > 1) throw DataError("unknown activation code in " + path.string());
  arch.activation = act == 0 ? Activation::relu : Activation::gelu;
  arch.output_dim = r.get<std::uint32_t>();

  Model model;
  model.patch.size = static_cast<int>(r.get<std::uint32_t>());
  model.patch.delta = r.get<double>();
  const auto norm = r.get<std::uint8_t>();
  if (norm > 1) throw DataError("unknown patch normalization code in " + path.string());
  model.patch.normalize = norm == 0 ? PatchNormalization::none : PatchNormalization::per_series_zscore;
  model.tilt_count = r.get<std::uint32_t>();
  model.target.scale = r.get<double>();
  model.target.offset = r.get<double>();
  const auto count = r.get<std::uint64_t>();
  try {
    arch.validate();
    model.patch.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("invalid checkpoint metadata: ") + e.what());
  }
  if (count != arch.param_count()) throw DataError("checkpoint parameter count does not match its architecture");
  if (r.remaining() < count * 4) throw DataError("short read: truncated parameter blob in " + path.string());
  if (r.remaining() > count * 4) throw DataError("trailing bytes after parameter blob in " + path.string());
  model.params = MlpParams<float>::zeros(arch);
  model.params.visit([&](std::span<float> block) {
    for (float& v : block) v = r.get<float>();
  });
  if (arch.input_dim != model.patch.feature_dim(model.tilt_count)) {
    throw DataError("checkpoint input dimension does not match its patch configuration and tilt count");
  }
  return model;
}

}  // namespace loctomo
