#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "wdrt/image.hpp"

namespace wdrt {

/// Decode one RGBE quadruple to linear radiance:
///   value = mantissa/256 * 2^(exponent-128), zero exponent maps to black.
std::array<double, 3> rgbe_decode(uint8_t r, uint8_t g, uint8_t b, uint8_t e);

/// Encode linear radiance to the nearest RGBE quadruple (shared exponent).
std::array<uint8_t, 4> rgbe_encode(double r, double g, double b);

/// Read a Radiance picture (`#?RADIANCE` / `#?RGBE`). Supports flat and
/// adaptive-RLE scanlines in `-Y H +X W` order; anything else is rejected
/// with a ParseError naming the byte offset.
ColorImage read_radiance_hdr(const std::filesystem::path& path);

}  // namespace wdrt
