#pragma once

#include <cstddef>
#include <vector>

#include "wdrt/image.hpp"

namespace wdrt {

/// Batched feature maps, (batch, channel, height, width), row-major.
template <typename T>
struct Tensor4 {
    int b = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor4() = default;
    Tensor4(int b_, int c_, int h_, int w_)
        : b(b_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(b_) * c_ * h_ * w_, T(0)) {}

    size_t size() const { return data.size(); }
    size_t plane() const { return static_cast<size_t>(h) * w; }

    T* plane_ptr(int ib, int ic) {
        return data.data() + (static_cast<size_t>(ib) * c + ic) * plane();
    }
    const T* plane_ptr(int ib, int ic) const {
        return data.data() + (static_cast<size_t>(ib) * c + ic) * plane();
    }
    T& at(int ib, int ic, int iy, int ix) {
        return data[((static_cast<size_t>(ib) * c + ic) * h + iy) * w + ix];
    }
    T at(int ib, int ic, int iy, int ix) const {
        return data[((static_cast<size_t>(ib) * c + ic) * h + iy) * w + ix];
    }
    bool same_shape(const Tensor4& o) const {
        return b == o.b && c == o.c && h == o.h && w == o.w;
    }
};

/// Single image -> (1,1,H,W) tensor.
template <typename T>
Tensor4<T> tensor_from_image(const LuminanceImage& img) {
    Tensor4<T> t(1, 1, img.height, img.width);
    for (size_t i = 0; i < img.data.size(); ++i) t.data[i] = static_cast<T>(img.data[i]);
    return t;
}

/// (b,0) plane of a tensor -> image.
template <typename T>
LuminanceImage image_from_tensor(const Tensor4<T>& t, int ib = 0, int ic = 0) {
    LuminanceImage img = LuminanceImage::zeros(t.w, t.h);
    const T* p = t.plane_ptr(ib, ic);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(p[i]);
    return img;
}

}  // namespace wdrt
