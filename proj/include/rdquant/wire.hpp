#pragma once

// Binary file formats, all little-endian.
//
// GRDV (gradient vector):
//   "GRDV" | u8 version = 1 | u64 d | d x f32
//
// GRDQ (encoded gradient):
//   "GRDQ" | u8 version = 1 | u8 tag | u64 d | payload
//   tag 1, scaled sign:  f32 scale | ceil(d/8) bytes sign bitmap (bit i of
//                        byte i/8, LSB first; 1 = non-negative)
//   tag 2, sparse b-bit: u64 K | u8 b | f32 lo | f32 hi | u8 index mode |
//                        indices | ceil(K*b/8) bytes of b-bit codes, LSB first
//                        index mode 0: ceil(d/8) bytes support bitmap (K*16 > d)
//                        index mode 1: K LEB128 gaps (K*16 <= d); the first gap is
//                        the first index, later gaps are idx[i] - idx[i-1] - 1
//   tag 3, ternary:      f32 scale | ceil(d/5) bytes, five base-3 digits per byte,
//                        least significant first; digit 0 = 0, 1 = +1, 2 = -1
// Unused padding bits must be zero and no bytes may follow the payload.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rdquant/codec.hpp"

namespace rdq {

enum class WireTag : std::uint8_t { ScaledSign = 1, SparseBbit = 2, Ternary = 3 };

inline constexpr std::uint8_t kWireVersion = 1;

std::vector<std::uint8_t> write_gradient(const GradientVector& u);
// Throws FormatError with the byte offset of the first violation.
GradientVector read_gradient(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> write_encoded(const EncodedGradient& enc);
EncodedGradient read_encoded(std::span<const std::uint8_t> bytes);

WireTag wire_tag(const EncodedGradient& enc);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace rdq
