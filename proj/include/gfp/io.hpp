#pragma once

#include "gfp/types.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace gfp::io {

/// Little-endian binary writer over a seekable stream.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw FormatError("cannot open for writing: " + path);
  }

  void u8(uint8_t v) { raw(&v, 1); }
  void u16(uint16_t v) { le(v); }
  void u32(uint32_t v) { le(v); }
  void u64(uint64_t v) { le(v); }
  void i32(int32_t v) { le(static_cast<uint32_t>(v)); }
  void f32(float v) { le(std::bit_cast<uint32_t>(v)); }
  void f64(double v) { le(std::bit_cast<uint64_t>(v)); }

  void bytes(const void* data, size_t n) { raw(data, n); }

  void str16(const std::string& s) {
    require(s.size() <= 0xffff, "string too long for u16 length prefix");
    u16(static_cast<uint16_t>(s.size()));
    raw(s.data(), s.size());
  }

  void str32(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(s.data(), s.size());
  }

  uint64_t tell() { return static_cast<uint64_t>(out_.tellp()); }

  void close() {
    out_.close();
    if (!out_) throw FormatError("write failed: " + path_);
  }

 private:
  template <typename T>
  void le(T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    raw(buf, sizeof(T));
  }

  void raw(const void* data, size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw FormatError("write failed: " + path_);
  }

  std::ofstream out_;
  std::string path_;
};

/// Little-endian binary reader. Throws FormatError on truncation.
class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path)
      : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw FormatError("cannot open for reading: " + path);
  }

  uint8_t u8() {
    uint8_t v;
    raw(&v, 1);
    return v;
  }
  uint16_t u16() { return le<uint16_t>(); }
  uint32_t u32() { return le<uint32_t>(); }
  uint64_t u64() { return le<uint64_t>(); }
  int32_t i32() { return static_cast<int32_t>(le<uint32_t>()); }
  float f32() { return std::bit_cast<float>(le<uint32_t>()); }
  double f64() { return std::bit_cast<double>(le<uint64_t>()); }

  void bytes(void* data, size_t n) { raw(data, n); }

  std::string str16() {
    uint16_t n = u16();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

  std::string str32() {
    uint32_t n = u32();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

  uint64_t tell() { return static_cast<uint64_t>(in_.tellg()); }

  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

 private:
  template <typename T>
  T le() {
    unsigned char buf[sizeof(T)];
    raw(buf, sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
  }

  void raw(void* data, size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw FormatError("truncated payload in " + path_);
  }

  std::ifstream in_;
  std::string path_;
};

}  // namespace gfp::io
