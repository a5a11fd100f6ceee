#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wdrt {

/// Base error type for the toolkit. IO parsers throw subtypes carrying the
/// byte offset of the defect.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : Error {
    ParseError(const std::string& what, size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
          byte_offset(offset) {}
    size_t byte_offset;
};

/// 3-channel linear radiance field, row-major RGB triples.
struct ColorImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // size 3*width*height

    static ColorImage zeros(int w, int h) {
        ColorImage im;
        im.width = w;
        im.height = h;
        im.data.assign(static_cast<size_t>(3) * w * h, 0.0);
        return im;
    }
    double& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

/// 2-D scalar field of linear luminance, row-major.
struct LuminanceImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // size width*height

    static LuminanceImage zeros(int w, int h) {
        LuminanceImage im;
        im.width = w;
        im.height = h;
        im.data.assign(static_cast<size_t>(w) * h, 0.0);
        return im;
    }
    static LuminanceImage constant(int w, int h, double v) {
        LuminanceImage im = zeros(w, h);
        for (double& d : im.data) d = v;
        return im;
    }
    double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

/// Saturation exponent for color recovery, in (0, 1].
struct ColorRecoveryParams {
    double s = 0.6;
};

enum class NormMode { Linear, Log };

const char* norm_mode_name(NormMode m);
NormMode norm_mode_from_name(const std::string& name);

/// Constants captured during normalization so the mapping can be inverted.
struct NormalizationRecord {
    NormMode mode = NormMode::Log;
    double min_value = 0.0;
    double max_value = 0.0;
    double eps = 1e-6;
};

/// Rec.709 luminance, L = 0.2126 R + 0.7152 G + 0.0722 B.
LuminanceImage luminance(const ColorImage& img);

/// Reattach chroma to a tone-mapped luminance: out_c = (hdr_c / h)^s * l.
/// h must be the luminance of hdr; pixels with h == 0 map to black.
ColorImage recover_color(const ColorImage& hdr, const LuminanceImage& h,
                         const LuminanceImage& l, const ColorRecoveryParams& p);

/// Map a positive-range luminance image into [0,1].
///   linear: v / max
///   log:    (log(v+eps) - log(min+eps)) / (log(max+eps) - log(min+eps))
/// A constant image maps to all-ones in either mode.
std::pair<LuminanceImage, NormalizationRecord> normalize_luminance(
    const LuminanceImage& img, NormMode mode);

/// Invert normalize_luminance given its record.
LuminanceImage denormalize_luminance(const LuminanceImage& img,
                                     const NormalizationRecord& rec);

}  // namespace wdrt
