#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wdrt/image.hpp"

namespace wdrt {

struct NamedTensorF32 {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<float> data;

    size_t count() const {
        size_t n = 1;
        for (uint32_t d : dims) n *= d;
        return n;
    }
};

/// Tensor container. On disk (all integers little-endian u32 unless noted):
///   magic "WDRT" | version | n | norm mode (u8, 0=linear 1=log) |
///   tensor count | per tensor: name length, name bytes, rank, dims[rank],
///   float32 data.
struct ModelWeights {
    uint32_t version = 1;
    uint32_t n = 6;
    NormMode norm_mode = NormMode::Log;
    std::vector<NamedTensorF32> tensors;

    const NamedTensorF32* find(const std::string& name) const;
    NamedTensorF32& add(const std::string& name, std::vector<uint32_t> dims);
};

void save_weights(const std::filesystem::path& path, const ModelWeights& w);
ModelWeights load_weights(const std::filesystem::path& path);

}  // namespace wdrt
