#include "wdrt/io_pfm.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace wdrt {

namespace {

void byteswap_floats(std::vector<float>& v) {
    for (float& f : v) {
        uint32_t u;
        std::memcpy(&u, &f, 4);
        u = __builtin_bswap32(u);
        std::memcpy(&f, &u, 4);
    }
}

constexpr bool host_is_little_endian() {
    return std::endian::native == std::endian::little;
}

// PFM tokens are separated by single whitespace characters; the header is
// three tokens (magic, dims, scale) followed by one whitespace byte and then
// raw binary scanlines, stored bottom-to-top.
struct PfmPayload {
    int width = 0, height = 0, channels = 0;
    std::vector<float> samples;  // top-to-bottom after load
};

PfmPayload read_payload(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());

    std::string magic;
    f >> magic;
    PfmPayload out;
    if (magic == "PF") {
        out.channels = 3;
    } else if (magic == "Pf") {
        out.channels = 1;
    } else {
        throw ParseError("not a PFM file (bad magic '" + magic + "')", 0);
    }

    double scale = 0.0;
    f >> out.width >> out.height >> scale;
    if (!f || out.width <= 0 || out.height <= 0) {
        throw ParseError("bad PFM dimension line", static_cast<size_t>(f.tellg()));
    }
    if (scale == 0.0) {
        throw ParseError("PFM scale must be nonzero", static_cast<size_t>(f.tellg()));
    }
    f.get();  // single whitespace byte before the raster

    const size_t count =
        static_cast<size_t>(out.width) * out.height * out.channels;
    std::vector<float> raw(count);
    f.read(reinterpret_cast<char*>(raw.data()), count * sizeof(float));
    if (!f) {
        throw ParseError("truncated PFM raster", static_cast<size_t>(f.gcount()));
    }

    const bool file_little = scale < 0.0;
    if (file_little != host_is_little_endian()) byteswap_floats(raw);

    // flip bottom-up storage to top-down
    out.samples.resize(count);
    const size_t row = static_cast<size_t>(out.width) * out.channels;
    for (int y = 0; y < out.height; ++y) {
        std::memcpy(&out.samples[static_cast<size_t>(y) * row],
                    &raw[static_cast<size_t>(out.height - 1 - y) * row],
                    row * sizeof(float));
    }
    return out;
}

void write_payload(const std::filesystem::path& path, const char* magic, int w,
                   int h, int channels, const std::vector<float>& top_down) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    const double scale = host_is_little_endian() ? -1.0 : 1.0;
    f << magic << "\n" << w << " " << h << "\n" << scale << "\n";
    const size_t row = static_cast<size_t>(w) * channels;
    for (int y = h - 1; y >= 0; --y) {
        f.write(reinterpret_cast<const char*>(&top_down[static_cast<size_t>(y) * row]),
                row * sizeof(float));
    }
    if (!f) throw Error("short write to " + path.string());
}

}  // namespace

ColorImage read_pfm(const std::filesystem::path& path) {
    PfmPayload p = read_payload(path);
    ColorImage img = ColorImage::zeros(p.width, p.height);
    const size_t n = img.pixel_count();
    if (p.channels == 3) {
        for (size_t i = 0; i < n * 3; ++i) img.data[i] = p.samples[i];
    } else {
        for (size_t i = 0; i < n; ++i) {
            img.data[i * 3 + 0] = p.samples[i];
            img.data[i * 3 + 1] = p.samples[i];
            img.data[i * 3 + 2] = p.samples[i];
        }
    }
    return img;
}

LuminanceImage read_pfm_luminance(const std::filesystem::path& path) {
    PfmPayload p = read_payload(path);
    if (p.channels == 1) {
        LuminanceImage img = LuminanceImage::zeros(p.width, p.height);
        for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = p.samples[i];
        return img;
    }
    ColorImage c = ColorImage::zeros(p.width, p.height);
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] = p.samples[i];
    return luminance(c);
}

void write_pfm(const std::filesystem::path& path, const ColorImage& img) {
    std::vector<float> samples(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        samples[i] = static_cast<float>(img.data[i]);
    }
    write_payload(path, "PF", img.width, img.height, 3, samples);
}

void write_pfm(const std::filesystem::path& path, const LuminanceImage& img) {
    std::vector<float> samples(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        samples[i] = static_cast<float>(img.data[i]);
    }
    write_payload(path, "Pf", img.width, img.height, 1, samples);
}

}  // namespace wdrt
