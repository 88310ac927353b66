#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace poseattn::io {

class TruncatedInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename UInt>
inline void write_le(std::ostream& out, UInt value) {
  unsigned char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(UInt));
}

template <typename UInt>
inline UInt read_le(std::istream& in) {
  unsigned char bytes[sizeof(UInt)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(UInt));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(UInt))) {
    throw TruncatedInput("unexpected end of input");
  }
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(bytes[i]) << (8 * i);
  }
  return value;
}

inline void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
inline void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
inline void write_f32(std::ostream& out, float v) {
  write_le(out, std::bit_cast<std::uint32_t>(v));
}
inline void write_f64(std::ostream& out, double v) {
  write_le(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
inline std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }
inline float read_f32(std::istream& in) {
  return std::bit_cast<float>(read_le<std::uint32_t>(in));
}
inline double read_f64(std::istream& in) {
  return std::bit_cast<double>(read_le<std::uint64_t>(in));
}

}  // namespace poseattn::io
