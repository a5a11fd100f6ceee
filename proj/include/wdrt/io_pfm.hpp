#pragma once

#include <filesystem>

#include "wdrt/image.hpp"

namespace wdrt {

/// Read a PFM file. `PF` is 3-channel, `Pf` grayscale (replicated to R=G=B).
/// The sign of the scale line selects the byte order of the payload.
ColorImage read_pfm(const std::filesystem::path& path);

/// Read a PFM file as luminance. `Pf` maps directly; `PF` goes through the
/// Rec.709 weights.
LuminanceImage read_pfm_luminance(const std::filesystem::path& path);

/// Write a 3-channel `PF` file (little-endian, scale -1).
void write_pfm(const std::filesystem::path& path, const ColorImage& img);

/// Write a grayscale `Pf` file (little-endian, scale -1).
void write_pfm(const std::filesystem::path& path, const LuminanceImage& img);

}  // namespace wdrt
