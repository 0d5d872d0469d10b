#ifndef SIMMIA_BINARY_IO_HPP
#define SIMMIA_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "simmia/errors.hpp"

// Little-endian scalar I/O for the checkpoint formats.
namespace simmia::binary {

template <typename T>
void put(std::ostream& out, T value) {
  if constexpr (std::is_same_v<T, double>) {
    put(out, std::bit_cast<std::uint64_t>(value));
  } else if constexpr (std::is_same_v<T, float>) {
    put(out, std::bit_cast<std::uint32_t>(value));
  } else {
    static_assert(std::is_integral_v<T>);
    const auto bits = static_cast<std::make_unsigned_t<T>>(value);
    char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(bytes, sizeof(T));
  }
}

template <typename T>
T get(std::istream& in) {
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(get<std::uint64_t>(in));
  } else if constexpr (std::is_same_v<T, float>) {
    return std::bit_cast<float>(get<std::uint32_t>(in));
  } else {
    static_assert(std::is_integral_v<T>);
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw FormatError("truncated checkpoint");
    std::make_unsigned_t<T> bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::make_unsigned_t<T>>(bytes[i]) << (8 * i);
    return static_cast<T>(bits);
  }
}

}  // namespace simmia::binary

#endif  // SIMMIA_BINARY_IO_HPP
