#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>

namespace seld {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

/// Little-endian primitive writer used by the WAV, feature and checkpoint
/// containers.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) { bytes(&v, 2); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f32(float v) { bytes(&v, 4); }
  void f64(double v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void f32_array(std::span<const float> v) { bytes(v.data(), v.size_bytes()); }
  void f64_array(std::span<const double> v) { bytes(v.data(), v.size_bytes()); }

 private:
  std::ostream& os_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& is) : is_(is) {}

  void bytes(void* p, std::size_t n) {
    if (!try_bytes(p, n)) throw std::runtime_error("unexpected end of file");
  }
  bool try_bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(is_.gcount()) == n;
  }
  void skip(std::size_t n) {
    is_.ignore(static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw std::runtime_error("unexpected end of file");
  }
  std::uint8_t u8() { return read<std::uint8_t>(); }
  std::uint16_t u16() { return read<std::uint16_t>(); }
  std::uint32_t u32() { return read<std::uint32_t>(); }
  std::uint64_t u64() { return read<std::uint64_t>(); }
  float f32() { return read<float>(); }
  double f64() { return read<double>(); }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 20)) throw std::runtime_error("string field too long");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  void f32_array(std::span<float> v) { bytes(v.data(), v.size_bytes()); }
  void f64_array(std::span<double> v) { bytes(v.data(), v.size_bytes()); }

 private:
  template <typename T>
  T read() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }

  std::istream& is_;
};

}  // namespace seld
