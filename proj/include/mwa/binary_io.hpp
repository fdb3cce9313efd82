#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mwa/errors.hpp"

// Little-endian fixed-width readers and writers shared by the embedding and checkpoint formats.
namespace mwa::binary {

template <typename UInt>
void write_uint(std::ostream& out, UInt value) {
  unsigned char bytes[sizeof(UInt)];
  for (std::size_t k = 0; k < sizeof(UInt); ++k) {
    bytes[k] = static_cast<unsigned char>((value >> (8 * k)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(UInt));
}

inline void write_f32(std::ostream& out, float value) {
  write_uint(out, std::bit_cast<std::uint32_t>(value));
}

inline void write_f64(std::ostream& out, double value) {
  write_uint(out, std::bit_cast<std::uint64_t>(value));
}

inline void write_bytes(std::ostream& out, const std::string& bytes) {
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Reads from a stream and reports short reads as FormatError.
class Reader {
 public:
  Reader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  template <typename UInt>
  UInt read_uint() {
    unsigned char bytes[sizeof(UInt)];
    read_raw(reinterpret_cast<char*>(bytes), sizeof(UInt));
    UInt value = 0;
    for (std::size_t k = 0; k < sizeof(UInt); ++k) value |= static_cast<UInt>(bytes[k]) << (8 * k);
    return value;
  }

  float read_f32() { return std::bit_cast<float>(read_uint<std::uint32_t>()); }
  double read_f64() { return std::bit_cast<double>(read_uint<std::uint64_t>()); }

  std::string read_bytes(std::size_t count) {
    std::string out(count, '\0');
    read_raw(out.data(), count);
    return out;
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  void read_raw(char* dst, std::size_t count) {
    in_.read(dst, static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in_.gcount()) != count) {
      throw FormatError(what_ + ": truncated file");
    }
  }

  std::istream& in_;
  std::string what_;
};

}  // namespace mwa::binary
