#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlalign {

// Little-endian binary IO for the versioned file formats. Host is assumed
// little-endian (checked once at startup of any reader/writer).

inline void check_little_endian() {
  const std::uint16_t probe = 1;
  char c;
  std::memcpy(&c, &probe, 1);
  if (c != 1) throw std::runtime_error("big-endian hosts are not supported");
}

class BinWriter {
 public:
  explicit BinWriter(const std::string& path)
      : out_(path, std::ios::binary) {
    check_little_endian();
    if (!out_) throw std::runtime_error("cannot open for write: " + path);
  }
  void magic(const std::string& m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void f64s(const std::vector<double>& v) {
    raw(v.data(), v.size() * 8);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("write failed");
  }

 private:
  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  std::ofstream out_;
};

class BinReader {
 public:
  explicit BinReader(const std::string& path)
      : in_(path, std::ios::binary), path_(path) {
    check_little_endian();
    if (!in_) throw std::runtime_error("cannot open for read: " + path);
  }
  void magic(const std::string& m) {
    std::string got(m.size(), '\0');
    raw(got.data(), m.size());
    if (got != m)
      throw std::runtime_error("bad magic in " + path_ + " (expected " + m + ")");
  }
  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  std::vector<double> f64s(std::size_t n) {
    std::vector<double> v(n);
    raw(v.data(), n * 8);
    return v;
  }
  std::string str() {
    const auto n = u32();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

 private:
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw std::runtime_error("truncated file: " + path_);
  }
  std::ifstream in_;
  std::string path_;
};

}  // namespace dlalign
