#pragma once

// Little-endian POD readers/writers shared by the binary containers.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "dynnet/errors.hpp"

namespace dynnet::io {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

template <class T>
  requires std::is_trivially_copyable_v<T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
  requires std::is_trivially_copyable_v<T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw FormatError("unexpected end of binary stream");
  }
  return v;
}

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char buf[4];
  if (!is.read(buf, 4) || std::string(buf, 4) != std::string(magic, 4)) {
    throw FormatError(std::string("bad magic, expected ") + magic);
  }
}

}  // namespace dynnet::io
