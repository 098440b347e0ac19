#pragma once

#include <bit>
#include <istream>
#include <ostream>

namespace nnviterbi::io {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need swaps");

template <class T>
void write_scalar(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <class T>
[[nodiscard]] bool read_scalar(std::istream& in, T& value) {
  return static_cast<bool>(
      in.read(reinterpret_cast<char*>(&value), sizeof value));
}

}  // namespace nnviterbi::io
