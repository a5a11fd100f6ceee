#include "wdrt/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace wdrt {

namespace {

constexpr char kMagic[4] = {'W', 'D', 'R', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& f, uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
    f.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t get_u32(std::istream& f, const char* what) {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (!f) throw Error(std::string("weight container truncated while reading ") + what);
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
    return v;
}

}  // namespace

const NamedTensorF32* ModelWeights::find(const std::string& name) const {
    for (const NamedTensorF32& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

NamedTensorF32& ModelWeights::add(const std::string& name, std::vector<uint32_t> dims) {
    NamedTensorF32 t;
    t.name = name;
    t.dims = std::move(dims);
    t.data.assign(t.count(), 0.0f);
    tensors.push_back(std::move(t));
    return tensors.back();
}

void save_weights(const std::filesystem::path& path, const ModelWeights& w) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f.write(kMagic, 4);
    put_u32(f, w.version);
    put_u32(f, w.n);
    const uint8_t mode = w.norm_mode == NormMode::Linear ? 0 : 1;
    f.write(reinterpret_cast<const char*>(&mode), 1);
    put_u32(f, static_cast<uint32_t>(w.tensors.size()));
    for (const NamedTensorF32& t : w.tensors) {
        if (t.data.size() != t.count()) {
            throw Error("tensor " + t.name + " has inconsistent dims/data");
        }
        put_u32(f, static_cast<uint32_t>(t.name.size()));
        f.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put_u32(f, static_cast<uint32_t>(t.dims.size()));
        for (uint32_t d : t.dims) put_u32(f, d);
        if constexpr (std::endian::native == std::endian::little) {
            f.write(reinterpret_cast<const char*>(t.data.data()),
                    static_cast<std::streamsize>(t.data.size() * 4));
        } else {
            for (float v : t.data) {
                uint32_t u;
                std::memcpy(&u, &v, 4);
                put_u32(f, u);
            }
        }
    }
    if (!f) throw Error("short write to " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    char magic[4] = {};
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0) {
        throw Error("not a WDRT weight container: " + path.string());
    }
    ModelWeights w;
    w.version = get_u32(f, "version");
    if (w.version != kVersion) {
        throw Error("unsupported weight container version " + std::to_string(w.version));
    }
    w.n = get_u32(f, "band count");
    uint8_t mode = 0;
    f.read(reinterpret_cast<char*>(&mode), 1);
    if (!f) throw Error("weight container truncated while reading norm mode");
    if (mode > 1) throw Error("bad normalization mode byte in weight container");
    w.norm_mode = mode == 0 ? NormMode::Linear : NormMode::Log;

    const uint32_t count = get_u32(f, "tensor count");
    w.tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensorF32 t;
        const uint32_t name_len = get_u32(f, "tensor name length");
        t.name.resize(name_len);
        f.read(t.name.data(), name_len);
        if (!f) throw Error("weight container truncated in tensor name");
        const uint32_t rank = get_u32(f, ("rank of " + t.name).c_str());
        t.dims.resize(rank);
        for (uint32_t r = 0; r < rank; ++r) {
            t.dims[r] = get_u32(f, ("dims of " + t.name).c_str());
        }
        t.data.resize(t.count());
        f.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * 4));
        if (!f) {
            throw Error("weight container truncated: missing tensor " + t.name);
        }
        if constexpr (std::endian::native == std::endian::big) {
            for (float& v : t.data) {
                uint32_t u;
                std::memcpy(&u, &v, 4);
                u = __builtin_bswap32(u);
                std::memcpy(&v, &u, 4);
            }
        }
        w.tensors.push_back(std::move(t));
    }
    return w;
}

}  // namespace wdrt
