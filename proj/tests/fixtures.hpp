#pragma once

// Byte-level helpers for building file fixtures by hand.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <vector>

namespace fixture {

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

// Stores v at offset in the given byte order, independent of the host.
template <typename T>
void store(std::vector<unsigned char>& b, std::size_t offset, T v, bool big_endian) {
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  const bool host_big = std::endian::native == std::endian::big;
  for (std::size_t i = 0; i < sizeof(T); ++i) b[offset + i] = raw[host_big == big_endian ? i : sizeof(T) - 1 - i];
}

// Minimal MRC2014 file: dimensions, mode, "MAP " and the machine stamp.
inline std::vector<unsigned char> mrc(int nx, int ny, int nz, int mode, const std::vector<float>& values, bool big) {
  std::vector<unsigned char> b(1024 + 4 * values.size(), 0);
  store<std::int32_t>(b, 0, nx, big);
  store<std::int32_t>(b, 4, ny, big);
  store<std::int32_t>(b, 8, nz, big);
  store<std::int32_t>(b, 12, mode, big);
  std::memcpy(b.data() + 208, "MAP ", 4);
  b[212] = big ? 0x11 : 0x44;
  b[213] = big ? 0x11 : 0x44;
  for (std::size_t i = 0; i < values.size(); ++i) store<float>(b, 1024 + 4 * i, values[i], big);
  return b;
}

}  // namespace fixture
