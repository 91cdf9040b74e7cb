#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "mwcnn/errors.hpp"

namespace mwcnn::detail {

// Little-endian binary file helpers. All multi-byte fields in the MWER,
// MWDS and MWNW containers go through these. Byte order is taken from the
// host, which this project requires to be little-endian.
static_assert(std::endian::native == std::endian::little);

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_arithmetic_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  put_bytes(os, buf, sizeof(T));
}

inline void get_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw ParseError(std::string("truncated file while reading ") + what);
}

template <typename T>
T get_le(std::istream& is, const char* what) {
  unsigned char buf[sizeof(T)];
  get_bytes(is, buf, sizeof(T), what);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

inline void expect_magic(std::istream& is, const char* magic, const char* format_name) {
  char buf[4];
  get_bytes(is, buf, 4, "magic");
  if (std::memcmp(buf, magic, 4) != 0)
    throw ParseError(std::string("bad magic for ") + format_name + " file (expected \"" + magic + "\")");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open for reading: " + path);
  return is;
}

}  // namespace mwcnn::detail
