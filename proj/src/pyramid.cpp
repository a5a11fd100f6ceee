#include "wdrt/pyramid.hpp"

#include <cmath>
#include <cstring>
#include <limits>

namespace wdrt {

int reflect_index(int i, int size) {
    if (size == 1) return 0;
    const int period = 2 * (size - 1);
    i = std::abs(i) % period;
    return i < size ? i : period - i;
}

long long receptive_field_pixels(int n, int k) {
    if (n < 1 || k < 1) throw Error("receptive_field_pixels: n and k must be >= 1");
    const long long side = (1LL << (n - 1)) * k;
    return side * side;
}

namespace pyrk {

namespace {

// analysis kernel (1,4,6,4,1)/16; the synthesis kernel is the same taps at
// twice the gain so that zero-inserted constants stay constant

template <typename T>
void down2_row(const T* src, int w, T* dst, int wd) {
    for (int i = 0; i < wd; ++i) {
        const int c = 2 * i;
        const T v = src[reflect_index(c - 2, w)] + T(4) * src[reflect_index(c - 1, w)] +
                    T(6) * src[c] + T(4) * src[reflect_index(c + 1, w)] +
                    src[reflect_index(c + 2, w)];
        dst[i] = v / T(16);
    }
}

template <typename T>
void up2_row(const T* src, int w, T* dst) {
    for (int i = 0; i < w; ++i) {
        const T sm = src[reflect_index(i - 1, w)];
        const T s0 = src[i];
        const T sp = src[reflect_index(i + 1, w)];
        dst[2 * i] = (sm + T(6) * s0 + sp) / T(8);
        dst[2 * i + 1] = (T(4) * s0 + T(4) * sp) / T(8);
    }
}

// scatter transpose of up2_row; dst must be zeroed
template <typename T>
void up2_row_adjoint(const T* gout, int w, T* gsrc) {
    for (int i = 0; i < w; ++i) {
        const T ge = gout[2 * i] / T(8);
        const T go = gout[2 * i + 1] / T(8);
        gsrc[reflect_index(i - 1, w)] += ge;
        gsrc[i] += T(6) * ge;
        gsrc[reflect_index(i + 1, w)] += ge;
        gsrc[i] += T(4) * go;
        gsrc[reflect_index(i + 1, w)] += T(4) * go;
    }
}

}  // namespace

template <typename T>
void down2(const T* src, int w, int h, T* dst) {
    const int wd = (w + 1) / 2, hd = (h + 1) / 2;
    std::vector<T> tmp(static_cast<size_t>(wd) * h);
#pragma omp parallel for schedule(static) if (h >= 64)
    for (int y = 0; y < h; ++y) {
        down2_row(src + static_cast<size_t>(y) * w, w, tmp.data() + static_cast<size_t>(y) * wd, wd);
    }
#pragma omp parallel for schedule(static) if (wd >= 64)
    for (int x = 0; x < wd; ++x) {
        std::vector<T> col(h), out(hd);
        for (int y = 0; y < h; ++y) col[y] = tmp[static_cast<size_t>(y) * wd + x];
        down2_row(col.data(), h, out.data(), hd);
        for (int y = 0; y < hd; ++y) dst[static_cast<size_t>(y) * wd + x] = out[y];
    }
}

template <typename T>
void up2(const T* src, int w, int h, T* dst) {
    const int w2 = 2 * w, h2 = 2 * h;
    std::vector<T> tmp(static_cast<size_t>(w2) * h);
#pragma omp parallel for schedule(static) if (h >= 64)
    for (int y = 0; y < h; ++y) {
        up2_row(src + static_cast<size_t>(y) * w, w, tmp.data() + static_cast<size_t>(y) * w2);
    }
#pragma omp parallel for schedule(static) if (w2 >= 64)
    for (int x = 0; x < w2; ++x) {
        std::vector<T> col(h), out(h2);
        for (int y = 0; y < h; ++y) col[y] = tmp[static_cast<size_t>(y) * w2 + x];
        up2_row(col.data(), h, out.data());
        for (int y = 0; y < h2; ++y) dst[static_cast<size_t>(y) * w2 + x] = out[y];
    }
}

template <typename T>
void up2_adjoint(const T* gout, int w, int h, T* gsrc) {
    const int w2 = 2 * w, h2 = 2 * h;
    // transpose of the column pass: (w2 x h2) -> (w2 x h)
    std::vector<T> gtmp(static_cast<size_t>(w2) * h, T(0));
#pragma omp parallel for schedule(static) if (w2 >= 64)
    for (int x = 0; x < w2; ++x) {
        std::vector<T> col(h2), acc(h, T(0));
        for (int y = 0; y < h2; ++y) col[y] = gout[static_cast<size_t>(y) * w2 + x];
        up2_row_adjoint(col.data(), h, acc.data());
        for (int y = 0; y < h; ++y) gtmp[static_cast<size_t>(y) * w2 + x] = acc[y];
    }
    // transpose of the row pass: (w2 x h) -> (w x h)
#pragma omp parallel for schedule(static) if (h >= 64)
    for (int y = 0; y < h; ++y) {
        T* row = gsrc + static_cast<size_t>(y) * w;
        std::fill(row, row + w, T(0));
        up2_row_adjoint(gtmp.data() + static_cast<size_t>(y) * w2, w, row);
    }
}

template <typename T>
void upsample_chain(const T* src, int w, int h, int times, std::vector<T>& out) {
    out.assign(src, src + static_cast<size_t>(w) * h);
    for (int t = 0; t < times; ++t) {
        std::vector<T> next(static_cast<size_t>(4) * w * h);
        up2(out.data(), w, h, next.data());
        out = std::move(next);
        w *= 2;
        h *= 2;
    }
}

template <typename T>
void upsample_chain_adjoint(const T* gout, int w, int h, int times,
                            std::vector<T>& gsrc) {
    int cw = w << times, ch = h << times;
    std::vector<T> g(gout, gout + static_cast<size_t>(cw) * ch);
    for (int t = 0; t < times; ++t) {
        cw /= 2;
        ch /= 2;
        std::vector<T> next(static_cast<size_t>(cw) * ch);
        up2_adjoint(g.data(), cw, ch, next.data());
        g = std::move(next);
    }
    gsrc = std::move(g);
}

namespace {

// Nudge lo by ulps until fl(lo + up) == target. The subtraction storing the
// high-frequency band rounds, and adding the same upsampled residual back
// would otherwise miss the source by an ulp on a few percent of pixels.
template <typename T>
T exact_difference(T target, T up) {
    T lo = target - up;
    T sum = lo + up;
    for (int k = 0; k < 8 && sum != target; ++k) {
        lo = std::nextafter(lo, sum < target ? std::numeric_limits<T>::max()
                                             : std::numeric_limits<T>::lowest());
        sum = lo + up;
    }
    return lo;
}

}  // namespace

template <typename T>
RawPair<T> reformulate_raw(const T* img, int w, int h, int n) {
    if (n < 2) throw Error("reformulate: band count must be >= 2");
    const int shift = n - 1;
    if (w % (1 << shift) != 0 || h % (1 << shift) != 0) {
        throw Error("reformulate_raw: dimensions must divide 2^(n-1)");
    }
    if ((w >> shift) < 2 || (h >> shift) < 2) {
        throw Error("reformulate: n too large for image size");
    }

    RawPair<T> pair;
    pair.n = n;
    pair.w = w;
    pair.h = h;

    // Gaussian chain down to the residual
    std::vector<T> g(img, img + static_cast<size_t>(w) * h);
    int cw = w, chh = h;
    for (int i = 0; i < shift; ++i) {
        std::vector<T> next(static_cast<size_t>((cw + 1) / 2) * ((chh + 1) / 2));
        down2(g.data(), cw, chh, next.data());
        g = std::move(next);
        cw = (cw + 1) / 2;
        chh = (chh + 1) / 2;
    }
    pair.gw = cw;
    pair.gh = chh;
    pair.x_g = std::move(g);

    std::vector<T> up;
    upsample_chain(pair.x_g.data(), pair.gw, pair.gh, shift, up);

    pair.x_l.resize(static_cast<size_t>(w) * h);
#pragma omp parallel for schedule(static) if (h >= 64)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            pair.x_l[i] = exact_difference(img[i], up[i]);
        }
    }
    return pair;
}

template <typename T>
std::vector<T> reconstruct_raw(const RawPair<T>& pair) {
    if (pair.w != pair.gw << (pair.n - 1) || pair.h != pair.gh << (pair.n - 1)) {
        throw Error("reconstruct_raw: dimension relation violated");
    }
    std::vector<T> up;
    upsample_chain(pair.x_g.data(), pair.gw, pair.gh, pair.n - 1, up);
    for (size_t i = 0; i < up.size(); ++i) up[i] += pair.x_l[i];
    return up;
}

template void down2<float>(const float*, int, int, float*);
template void down2<double>(const double*, int, int, double*);
template void up2<float>(const float*, int, int, float*);
template void up2<double>(const double*, int, int, double*);
template void up2_adjoint<float>(const float*, int, int, float*);
template void up2_adjoint<double>(const double*, int, int, double*);
template void upsample_chain<float>(const float*, int, int, int, std::vector<float>&);
template void upsample_chain<double>(const double*, int, int, int, std::vector<double>&);
template void upsample_chain_adjoint<float>(const float*, int, int, int, std::vector<float>&);
template void upsample_chain_adjoint<double>(const double*, int, int, int, std::vector<double>&);
template RawPair<float> reformulate_raw<float>(const float*, int, int, int);
template RawPair<double> reformulate_raw<double>(const double*, int, int, int);
template std::vector<float> reconstruct_raw<float>(const RawPair<float>&);
template std::vector<double> reconstruct_raw<double>(const RawPair<double>&);

}  // namespace pyrk

LuminanceImage pyr_down(const LuminanceImage& img) {
    if (img.width < 2 || img.height < 2) {
        throw Error("pyr_down: degenerate 1-pixel dimension");
    }
    LuminanceImage out = LuminanceImage::zeros((img.width + 1) / 2, (img.height + 1) / 2);
    pyrk::down2(img.data.data(), img.width, img.height, out.data.data());
    return out;
}

LuminanceImage pyr_up(const LuminanceImage& img, int target_w, int target_h) {
    if (target_w != 2 * img.width || target_h != 2 * img.height) {
        throw Error("pyr_up: target dimensions must be exactly twice the source");
    }
    LuminanceImage out = LuminanceImage::zeros(target_w, target_h);
    pyrk::up2(img.data.data(), img.width, img.height, out.data.data());
    return out;
}

LaplacianPyramid build_laplacian(const LuminanceImage& img, int n) {
    if (n < 2) throw Error("build_laplacian: band count must be >= 2");
    const int div = 1 << (n - 1);
    if (img.width % div != 0 || img.height % div != 0) {
        throw Error("build_laplacian: dimensions must divide 2^(n-1); pad first");
    }
    if (img.width / div < 2 || img.height / div < 2) {
        throw Error("build_laplacian: n too large for image size");
    }

    LaplacianPyramid pyr;
    pyr.n = n;
    std::vector<LuminanceImage> gauss;
    gauss.push_back(img);
    for (int i = 1; i < n; ++i) gauss.push_back(pyr_down(gauss.back()));

    for (int i = 0; i + 1 < n; ++i) {
        const LuminanceImage up =
            pyr_up(gauss[i + 1], gauss[i].width, gauss[i].height);
        LuminanceImage band = LuminanceImage::zeros(gauss[i].width, gauss[i].height);
        for (size_t p = 0; p < band.data.size(); ++p) {
            band.data[p] = pyrk::exact_difference(gauss[i].data[p], up.data[p]);
        }
        pyr.bands.push_back(std::move(band));
    }
    pyr.bands.push_back(std::move(gauss.back()));
    return pyr;
}

LuminanceImage collapse(const LaplacianPyramid& pyr) {
    if (pyr.bands.empty()) throw Error("collapse: empty pyramid");
    LuminanceImage acc = pyr.bands.back();
    for (int i = static_cast<int>(pyr.bands.size()) - 2; i >= 0; --i) {
        const LuminanceImage up =
            pyr_up(acc, pyr.bands[i].width, pyr.bands[i].height);
        acc = LuminanceImage::zeros(up.width, up.height);
        for (size_t p = 0; p < acc.data.size(); ++p) {
            acc.data[p] = pyr.bands[i].data[p] + up.data[p];
        }
    }
    return acc;
}

ReformulatedPair reformulate(const LuminanceImage& img, int n) {
    if (n < 2) throw Error("reformulate: band count must be >= 2");
    auto [padded, pad] = pad_to_multiple(img, 1 << (n - 1));
    pyrk::RawPair<double> raw =
        pyrk::reformulate_raw(padded.data.data(), padded.width, padded.height, n);

    ReformulatedPair pair;
    pair.n = n;
    pair.pad = pad;
    pair.x_l.width = raw.w;
    pair.x_l.height = raw.h;
    pair.x_l.data = std::move(raw.x_l);
    pair.x_g.width = raw.gw;
    pair.x_g.height = raw.gh;
    pair.x_g.data = std::move(raw.x_g);
    return pair;
}

LuminanceImage reconstruct_pair(const ReformulatedPair& pair) {
    pyrk::RawPair<double> raw;
    raw.n = pair.n;
    raw.w = pair.x_l.width;
    raw.h = pair.x_l.height;
    raw.gw = pair.x_g.width;
    raw.gh = pair.x_g.height;
    raw.x_l = pair.x_l.data;
    raw.x_g = pair.x_g.data;
    LuminanceImage out;
    out.width = raw.w;
    out.height = raw.h;
    out.data = pyrk::reconstruct_raw(raw);
    return crop_pad(out, pair.pad);
}

std::pair<LuminanceImage, PadRecord> pad_to_multiple(const LuminanceImage& img, int m) {
    if (m < 1) throw Error("pad_to_multiple: multiple must be >= 1");
    PadRecord rec;
    rec.orig_width = img.width;
    rec.orig_height = img.height;
    rec.pad_right = (m - img.width % m) % m;
    rec.pad_bottom = (m - img.height % m) % m;

    const int w = img.width + rec.pad_right;
    const int h = img.height + rec.pad_bottom;
    LuminanceImage out = LuminanceImage::zeros(w, h);
    for (int y = 0; y < h; ++y) {
        const int sy = reflect_index(y, img.height);
        for (int x = 0; x < w; ++x) {
            out.at(x, y) = img.at(reflect_index(x, img.width), sy);
        }
    }
    return {std::move(out), rec};
}

LuminanceImage crop_pad(const LuminanceImage& img, const PadRecord& pad) {
    if (img.width != pad.orig_width + pad.pad_right ||
        img.height != pad.orig_height + pad.pad_bottom) {
        throw Error("crop_pad: padded dimensions do not match record");
    }
    LuminanceImage out = LuminanceImage::zeros(pad.orig_width, pad.orig_height);
    for (int y = 0; y < pad.orig_height; ++y) {
        std::memcpy(&out.at(0, y), &img.at(0, y), sizeof(double) * pad.orig_width);
    }
    return out;
}

}  // namespace wdrt
