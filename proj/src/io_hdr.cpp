#include "wdrt/io_hdr.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace wdrt {

std::array<double, 3> rgbe_decode(uint8_t r, uint8_t g, uint8_t b, uint8_t e) {
    if (e == 0) return {0.0, 0.0, 0.0};
    const double scale = std::ldexp(1.0 / 256.0, static_cast<int>(e) - 128);
    return {r * scale, g * scale, b * scale};
}

std::array<uint8_t, 4> rgbe_encode(double r, double g, double b) {
    const double m = std::max(r, std::max(g, b));
    if (m < 1e-38) return {0, 0, 0, 0};
    int exp = 0;
    std::frexp(m, &exp);  // m = f * 2^exp with f in [0.5, 1)
    const double scale = std::ldexp(256.0, -exp);
    auto q = [&](double v) {
        int iv = static_cast<int>(v * scale);
        return static_cast<uint8_t>(std::min(iv, 255));
    };
    return {q(r), q(g), q(b), static_cast<uint8_t>(exp + 128)};
}

namespace {

struct Cursor {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;

    bool eof() const { return pos >= buf.size(); }
    uint8_t byte(const char* what) {
        if (eof()) throw ParseError(std::string("truncated file while reading ") + what, pos);
        return buf[pos++];
    }
    std::string line() {
        const size_t start = pos;
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
        if (pos >= buf.size()) throw ParseError("missing newline in header", start);
        std::string s(buf.begin() + start, buf.begin() + pos);
        ++pos;  // consume '\n'
        return s;
    }
};

void decode_into(ColorImage& img, size_t pixel, uint8_t r, uint8_t g, uint8_t b,
                 uint8_t e) {
    const auto rgb = rgbe_decode(r, g, b, e);
    img.data[pixel * 3 + 0] = rgb[0];
    img.data[pixel * 3 + 1] = rgb[1];
    img.data[pixel * 3 + 2] = rgb[2];
}

// Adaptive RLE stores each scanline per channel as runs (code > 128 means
// code-128 repeats of the next byte) and literals (code <= 128 bytes follow).
void read_rle_scanline(Cursor& c, std::vector<uint8_t>& line, int width) {
    for (int ch = 0; ch < 4; ++ch) {
        int x = 0;
        while (x < width) {
            const size_t at = c.pos;
            const int code = c.byte("scanline run code");
            if (code > 128) {
                const int count = code - 128;
                if (x + count > width) {
                    throw ParseError("RLE run overflows scanline", at);
                }
                const uint8_t v = c.byte("scanline run value");
                for (int i = 0; i < count; ++i) line[(x + i) * 4 + ch] = v;
                x += count;
            } else {
                const int count = code;
                if (count == 0) throw ParseError("zero-length RLE literal", at);
                if (x + count > width) {
                    throw ParseError("RLE literal overflows scanline", at);
                }
                for (int i = 0; i < count; ++i) {
                    line[(x + i) * 4 + ch] = c.byte("scanline literal");
                }
                x += count;
            }
        }
    }
}

}  // namespace

ColorImage read_radiance_hdr(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
    Cursor c{buf};

    if (buf.size() < 2 || buf[0] != '#' || buf[1] != '?') {
        throw ParseError("not a Radiance picture (missing #? magic)", 0);
    }
    const std::string magic = c.line();
    if (magic != "#?RADIANCE" && magic != "#?RGBE") {
        throw ParseError("unrecognized Radiance program type '" + magic + "'", 0);
    }

    // header: variable=value lines until a blank line
    bool format_ok = true;
    while (true) {
        const size_t at = c.pos;
        const std::string ln = c.line();
        if (ln.empty()) break;
        if (ln[0] == '#') continue;  // comment
        if (ln.rfind("FORMAT=", 0) == 0) {
            const std::string fmt = ln.substr(7);
            format_ok = (fmt == "32-bit_rle_rgbe");
            if (!format_ok) {
                throw ParseError("unsupported FORMAT '" + fmt + "'", at);
            }
        }
        // EXPOSURE / GAMMA and friends are ignored; values stay as stored
    }

    const size_t res_at = c.pos;
    const std::string res = c.line();
    int width = 0, height = 0;
    if (std::sscanf(res.c_str(), "-Y %d +X %d", &height, &width) != 2) {
        throw ParseError("unsupported pixel order '" + res + "' (expected -Y H +X W)",
                         res_at);
    }
    if (width <= 0 || height <= 0) {
        throw ParseError("bad resolution '" + res + "'", res_at);
    }

    ColorImage img = ColorImage::zeros(width, height);
    std::vector<uint8_t> line(static_cast<size_t>(width) * 4);

    for (int y = 0; y < height; ++y) {
        const uint8_t b0 = c.byte("scanline");
        const uint8_t b1 = c.byte("scanline");
        const uint8_t b2 = c.byte("scanline");
        const uint8_t b3 = c.byte("scanline");
        const bool rle_marker =
            b0 == 2 && b1 == 2 && ((b2 << 8) | b3) == width && width >= 8 &&
            width < 32768;
        if (rle_marker) {
            read_rle_scanline(c, line, width);
            for (int x = 0; x < width; ++x) {
                decode_into(img, static_cast<size_t>(y) * width + x, line[x * 4 + 0],
                            line[x * 4 + 1], line[x * 4 + 2], line[x * 4 + 3]);
            }
        } else {
            // flat scanline: the four bytes already read are the first pixel
            decode_into(img, static_cast<size_t>(y) * width, b0, b1, b2, b3);
            for (int x = 1; x < width; ++x) {
                const uint8_t r = c.byte("flat pixel");
                const uint8_t g = c.byte("flat pixel");
                const uint8_t b = c.byte("flat pixel");
                const uint8_t e = c.byte("flat pixel");
                decode_into(img, static_cast<size_t>(y) * width + x, r, g, b, e);
            }
        }
    }
    return img;
}

}  // namespace wdrt
