#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "rar/error.hpp"
#include "rar/tensor.hpp"

namespace rar {

// RAFT tensor container: magic "RAFT", u8 version = 1, u8 tensor count,
// then per tensor u32 W, u32 H, u32 C (little endian) followed by
// W*H*C little-endian 32-bit floats, row-major channel-last.
namespace raft {

constexpr std::uint8_t kVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  std::uint8_t b[4] = {static_cast<std::uint8_t>(v),
                       static_cast<std::uint8_t>(v >> 8),
                       static_cast<std::uint8_t>(v >> 16),
                       static_cast<std::uint8_t>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& path) {
  std::uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw ParseError(path + ": truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint32_t float_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  return u;
}

inline float bits_float(std::uint32_t u) {
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace detail

inline void save(const std::vector<Tensor3>& tensors, const std::string& path) {
  if (tensors.size() > 255) throw ParameterError("raft::save: too many tensors");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot write");
  out.write("RAFT", 4);
  std::uint8_t meta[2] = {kVersion, static_cast<std::uint8_t>(tensors.size())};
  out.write(reinterpret_cast<const char*>(meta), 2);
  std::vector<std::uint8_t> buf;
  for (const Tensor3& t : tensors) {
    detail::put_u32(out, static_cast<std::uint32_t>(t.width()));
    detail::put_u32(out, static_cast<std::uint32_t>(t.height()));
    detail::put_u32(out, static_cast<std::uint32_t>(t.channels()));
    buf.resize(t.size() * 4);
    std::size_t i = 0;
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x)
        for (int ch = 0; ch < t.channels(); ++ch) {
          const std::uint32_t u =
              detail::float_bits(static_cast<float>(t.at(x, y, ch)));
          buf[i++] = static_cast<std::uint8_t>(u);
          buf[i++] = static_cast<std::uint8_t>(u >> 8);
          buf[i++] = static_cast<std::uint8_t>(u >> 16);
          buf[i++] = static_cast<std::uint8_t>(u >> 24);
        }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw DataError(path + ": write failed");
}

inline std::vector<Tensor3> load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open");
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "RAFT", 4) != 0)
    throw ParseError(path + ": bad magic, not a RAFT file");
  std::uint8_t meta[2];
  in.read(reinterpret_cast<char*>(meta), 2);
  if (in.gcount() != 2) throw ParseError(path + ": truncated header");
  if (meta[0] != kVersion)
    throw ParseError(path + ": unsupported RAFT version " + std::to_string(meta[0]));
  const int count = meta[1];
  std::vector<Tensor3> tensors;
  tensors.reserve(count);
  std::vector<std::uint8_t> buf;
  for (int li = 0; li < count; ++li) {
    const std::uint32_t w = detail::get_u32(in, path);
    const std::uint32_t h = detail::get_u32(in, path);
    const std::uint32_t c = detail::get_u32(in, path);
    if (w == 0 || h == 0 || c == 0 || w > (1u << 20) || h > (1u << 20) || c > (1u << 16))
      throw ParseError(path + ": implausible tensor shape in header");
    const std::size_t n = static_cast<std::size_t>(w) * h * c * 4;
    buf.resize(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw ParseError(path + ": truncated tensor data, missing " +
                       std::to_string(n - in.gcount()) + " bytes");
    Tensor3 t(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
    std::size_t i = 0;
    for (std::uint32_t y = 0; y < h; ++y)
      for (std::uint32_t x = 0; x < w; ++x)
        for (std::uint32_t ch = 0; ch < c; ++ch) {
          const std::uint32_t u = static_cast<std::uint32_t>(buf[i]) |
                                  (static_cast<std::uint32_t>(buf[i + 1]) << 8) |
                                  (static_cast<std::uint32_t>(buf[i + 2]) << 16) |
                                  (static_cast<std::uint32_t>(buf[i + 3]) << 24);
          i += 4;
          const float f = detail::bits_float(u);
          if (!std::isfinite(f))
            throw DataError(path + ": non-finite value in tensor " +
                            std::to_string(li));
          t.at(static_cast<int>(x), static_cast<int>(y), static_cast<int>(ch)) = f;
        }
    tensors.push_back(std::move(t));
  }
  return tensors;
}

}  // namespace raft
}  // namespace rar
