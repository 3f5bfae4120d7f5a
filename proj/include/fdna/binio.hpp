#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "fdna/errors.hpp"
#include "fdna/rng.hpp"

namespace fdna {

static_assert(std::endian::native == std::endian::little,
              "artifact layouts are little-endian");

// stable text rendering for doubles in artifacts (round-trips exactly)
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct BinWriter {
  std::string buffer;

  void bytes(const void* data, std::size_t n) {
    buffer.append(static_cast<const char*>(data), n);
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof(v)); }
  void u64(std::uint64_t v) { bytes(&v, sizeof(v)); }
  void i32(std::int32_t v) { bytes(&v, sizeof(v)); }
  void f64(double v) { bytes(&v, sizeof(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void f64s(const std::vector<double>& v) {
    u64(v.size());
    bytes(v.data(), v.size() * sizeof(double));
  }
  void i32s(const std::vector<std::int32_t>& v) {
    u64(v.size());
    bytes(v.data(), v.size() * sizeof(std::int32_t));
  }

  // payload followed by its FNV-1a checksum
  void write_file(const std::string& path) const {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw data_error("cannot write file: " + path);
    const std::uint64_t checksum = fnv1a64(buffer.data(), buffer.size());
    bool ok = std::fwrite(buffer.data(), 1, buffer.size(), f) ==
              buffer.size();
    ok = ok && std::fwrite(&checksum, 1, sizeof(checksum), f) ==
                   sizeof(checksum);
    ok = std::fclose(f) == 0 && ok;
    if (!ok) throw data_error("short write: " + path);
  }
};

struct BinReader {
  std::string buffer;
  std::size_t pos = 0;

  explicit BinReader(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw data_error("cannot open file: " + path);
    std::fseek(f, 0, SEEK_END);
    const long size = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    buffer.resize(static_cast<std::size_t>(size));
    const bool ok =
        std::fread(buffer.data(), 1, buffer.size(), f) == buffer.size();
    std::fclose(f);
    if (!ok) throw data_error("short read: " + path);
    if (buffer.size() < sizeof(std::uint64_t)) {
      throw data_error("truncated file: " + path);
    }
    std::uint64_t stored = 0;
    std::memcpy(&stored, buffer.data() + buffer.size() - sizeof(stored),
                sizeof(stored));
    buffer.resize(buffer.size() - sizeof(stored));
    if (stored != fnv1a64(buffer.data(), buffer.size())) {
      throw data_error("checksum mismatch in " + path);
    }
  }

  void bytes(void* out, std::size_t n) {
    if (pos + n > buffer.size()) throw data_error("truncated artifact");
    std::memcpy(out, buffer.data() + pos, n);
    pos += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof(v));
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof(v));
    return v;
  }
  std::int32_t i32() {
    std::int32_t v;
    bytes(&v, sizeof(v));
    return v;
  }
  double f64() {
    double v;
    bytes(&v, sizeof(v));
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::vector<double> f64s() {
    const std::uint64_t n = u64();
    std::vector<double> v(n);
    bytes(v.data(), n * sizeof(double));
    return v;
  }
  std::vector<std::int32_t> i32s() {
    const std::uint64_t n = u64();
    std::vector<std::int32_t> v(n);
    bytes(v.data(), n * sizeof(std::int32_t));
    return v;
  }
};

}  // namespace fdna
