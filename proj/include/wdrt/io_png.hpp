#pragma once

#include <filesystem>

#include "wdrt/image.hpp"

namespace wdrt {

/// Write an 8-bit grayscale PNG. Values must be in [0,1]; quantization is
/// round(255*v) with halves rounded away from zero.
void write_png8(const std::filesystem::path& path, const LuminanceImage& img);

/// Write an 8-bit RGB PNG, same range and quantization rule.
void write_png8(const std::filesystem::path& path, const ColorImage& img);

}  // namespace wdrt
