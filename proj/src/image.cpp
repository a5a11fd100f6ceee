#include "wdrt/image.hpp"

#include <cmath>

namespace wdrt {

const char* norm_mode_name(NormMode m) {
    return m == NormMode::Linear ? "linear" : "log";
}

NormMode norm_mode_from_name(const std::string& name) {
    if (name == "linear") return NormMode::Linear;
    if (name == "log") return NormMode::Log;
    throw Error("unknown normalization mode: " + name);
}

LuminanceImage luminance(const ColorImage& img) {
    LuminanceImage out = LuminanceImage::zeros(img.width, img.height);
    const size_t n = img.pixel_count();
    for (size_t i = 0; i < n; ++i) {
        const double* px = &img.data[i * 3];
        out.data[i] = 0.2126 * px[0] + 0.7152 * px[1] + 0.0722 * px[2];
    }
    return out;
}

ColorImage recover_color(const ColorImage& hdr, const LuminanceImage& h,
                         const LuminanceImage& l, const ColorRecoveryParams& p) {
    if (h.width != hdr.width || h.height != hdr.height ||
        l.width != hdr.width || l.height != hdr.height) {
        throw Error("recover_color: dimension mismatch");
    }
    if (!(p.s > 0.0 && p.s <= 1.0)) {
        throw Error("recover_color: saturation exponent must be in (0, 1]");
    }
    ColorImage out = ColorImage::zeros(hdr.width, hdr.height);
    const size_t n = hdr.pixel_count();
    for (size_t i = 0; i < n; ++i) {
        const double hv = h.data[i];
        if (hv == 0.0) continue;  // black stays black
        const double lv = l.data[i];
        for (int c = 0; c < 3; ++c) {
            const double ratio = hdr.data[i * 3 + c] / hv;
            out.data[i * 3 + c] = std::pow(ratio, p.s) * lv;
        }
    }
    return out;
}

std::pair<LuminanceImage, NormalizationRecord> normalize_luminance(
    const LuminanceImage& img, NormMode mode) {
    if (img.data.empty()) throw Error("normalize_luminance: empty image");
    double lo = img.data[0], hi = img.data[0];
    for (double v : img.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi <= 0.0) throw Error("normalize_luminance: all-zero image");

    NormalizationRecord rec;
    rec.mode = mode;
    rec.min_value = lo;
    rec.max_value = hi;

    LuminanceImage out = LuminanceImage::zeros(img.width, img.height);
    if (mode == NormMode::Linear) {
        for (size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i] / hi;
    } else {
        const double denom = std::log(hi + rec.eps) - std::log(lo + rec.eps);
        if (denom == 0.0) {
            // constant image: degenerate log range, everything is the maximum
            for (double& v : out.data) v = 1.0;
        } else {
            const double lmin = std::log(lo + rec.eps);
            for (size_t i = 0; i < img.data.size(); ++i) {
                out.data[i] = (std::log(img.data[i] + rec.eps) - lmin) / denom;
            }
        }
    }
    return {std::move(out), rec};
}

LuminanceImage denormalize_luminance(const LuminanceImage& img,
                                     const NormalizationRecord& rec) {
    LuminanceImage out = LuminanceImage::zeros(img.width, img.height);
    if (rec.mode == NormMode::Linear) {
        for (size_t i = 0; i < img.data.size(); ++i) {
            out.data[i] = img.data[i] * rec.max_value;
        }
    } else {
        const double lmin = std::log(rec.min_value + rec.eps);
        const double lmax = std::log(rec.max_value + rec.eps);
        for (size_t i = 0; i < img.data.size(); ++i) {
            out.data[i] = std::exp(img.data[i] * (lmax - lmin) + lmin) - rec.eps;
        }
    }
    return out;
}

}  // namespace wdrt
