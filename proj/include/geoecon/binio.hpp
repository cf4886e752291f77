#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "geoecon/error.hpp"

// Little-endian raw IO used by the GEOF/GEOM containers.
static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

namespace geoecon {

class BinWriter {
public:
  explicit BinWriter(const std::string& path)
      : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoError("cannot write '" + path + "'");
  }
  void bytes(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write failed on '" + path_ + "'");
  }
  template <class T>
  void pod(T v) {
    bytes(&v, sizeof(T));
  }
  template <class T>
  void array(std::span<const T> v) {
    bytes(v.data(), v.size() * sizeof(T));
  }
  void str(const std::string& s) {
    if (s.size() > 0xffff) throw InternalError("string too long for container");
    pod<uint16_t>(static_cast<uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }

private:
  std::ofstream out_;
  std::string path_;
};

class BinReader {
public:
  explicit BinReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open '" + path + "'");
  }
  void bytes(void* p, size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n)
      throw ValidationError("'" + path_ + "': truncated file");
  }
  template <class T>
  T pod() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  template <class T>
  void array(std::span<T> v) {
    bytes(v.data(), v.size() * sizeof(T));
  }
  std::string str() {
    const auto len = pod<uint16_t>();
    std::string s(len, '\0');
    bytes(s.data(), len);
    return s;
  }
  const std::string& path() const { return path_; }

private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace geoecon
