#include "wdrt/io_png.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

namespace wdrt {

namespace {

void put_u32_be(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(static_cast<uint8_t>(x >> 24));
    v.push_back(static_cast<uint8_t>(x >> 16));
    v.push_back(static_cast<uint8_t>(x >> 8));
    v.push_back(static_cast<uint8_t>(x));
}

void write_chunk(std::ofstream& f, const char type[4],
                 const std::vector<uint8_t>& payload) {
    std::vector<uint8_t> head;
    put_u32_be(head, static_cast<uint32_t>(payload.size()));
    f.write(reinterpret_cast<const char*>(head.data()), head.size());
    f.write(type, 4);
    if (!payload.empty()) {
        f.write(reinterpret_cast<const char*>(payload.data()), payload.size());
    }
    uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
    if (!payload.empty()) crc = crc32(crc, payload.data(), payload.size());
    std::vector<uint8_t> tail;
    put_u32_be(tail, static_cast<uint32_t>(crc));
    f.write(reinterpret_cast<const char*>(tail.data()), tail.size());
}

uint8_t quantize(double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw Error("write_png8: value " + std::to_string(v) + " outside [0,1]");
    }
    return static_cast<uint8_t>(std::floor(255.0 * v + 0.5));
}

void write_png(const std::filesystem::path& path, int w, int h, int channels,
               const std::vector<uint8_t>& pixels) {
    // scanlines with filter byte 0
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(h) * (1 + static_cast<size_t>(w) * channels));
    const size_t row = static_cast<size_t>(w) * channels;
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), pixels.begin() + static_cast<size_t>(y) * row,
                   pixels.begin() + static_cast<size_t>(y + 1) * row);
    }
    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> z(zlen);
    if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw Error("PNG deflate failed");
    }
    z.resize(zlen);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(w));
    put_u32_be(ihdr, static_cast<uint32_t>(h));
    ihdr.push_back(8);                                   // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);               // gray / truecolor
    ihdr.push_back(0);                                   // deflate
    ihdr.push_back(0);                                   // filter method
    ihdr.push_back(0);                                   // no interlace
    write_chunk(f, "IHDR", ihdr);
    write_chunk(f, "IDAT", z);
    write_chunk(f, "IEND", {});
    if (!f) throw Error("short write to " + path.string());
}

}  // namespace

void write_png8(const std::filesystem::path& path, const LuminanceImage& img) {
    std::vector<uint8_t> px(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) px[i] = quantize(img.data[i]);
    write_png(path, img.width, img.height, 1, px);
}

void write_png8(const std::filesystem::path& path, const ColorImage& img) {
    std::vector<uint8_t> px(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) px[i] = quantize(img.data[i]);
    write_png(path, img.width, img.height, 3, px);
}

}  // namespace wdrt
