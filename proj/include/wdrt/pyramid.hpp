#pragma once

#include <utility>
#include <vector>

#include "wdrt/image.hpp"

namespace wdrt {

/// Reflect-padding record produced by pad_to_multiple.
struct PadRecord {
    int orig_width = 0;
    int orig_height = 0;
    int pad_right = 0;
    int pad_bottom = 0;
};

/// Bands ordered highest frequency first; the last band is the Gaussian
/// residual. Band i has dimensions dims(input)/2^i.
struct LaplacianPyramid {
    std::vector<LuminanceImage> bands;
    int n = 0;
};

/// Two-band decomposition: x_l holds all high-frequency content at full
/// (padded) resolution, x_g the low-frequency residual at 1/2^{n-1} scale.
/// x_l + up^{n-1}(x_g) restores the padded input bitwise.
struct ReformulatedPair {
    LuminanceImage x_l;
    LuminanceImage x_g;
    int n = 2;
    PadRecord pad;
};

/// Mirror-without-edge-repeat boundary index.
int reflect_index(int i, int size);

/// Input pixels covered by a k x k kernel applied at 1/2^{n-1} scale.
long long receptive_field_pixels(int n, int k);

/// Blur with the separable (1,4,6,4,1)/16 kernel, reflect boundary, then
/// keep even-indexed samples. Output is ceil(w/2) x ceil(h/2).
LuminanceImage pyr_down(const LuminanceImage& img);

/// Zero-insertion upsample followed by the doubled analysis kernel, so
/// constants are preserved. Target dimensions must be exactly twice the
/// source.
LuminanceImage pyr_up(const LuminanceImage& img, int target_w, int target_h);

/// Burt-Adelson pyramid. Input dimensions must be divisible by 2^{n-1}.
LaplacianPyramid build_laplacian(const LuminanceImage& img, int n);

/// Invert build_laplacian.
LuminanceImage collapse(const LaplacianPyramid& pyr);

/// Pads to a multiple of 2^{n-1} (recorded in the result), then splits into
/// the two reformulated bands.
ReformulatedPair reformulate(const LuminanceImage& img, int n);

/// x_l + up^{n-1}(x_g), with the recorded padding removed.
LuminanceImage reconstruct_pair(const ReformulatedPair& pair);

std::pair<LuminanceImage, PadRecord> pad_to_multiple(const LuminanceImage& img, int m);
LuminanceImage crop_pad(const LuminanceImage& img, const PadRecord& pad);

// Scalar-templated kernels behind the image API. The float instantiation
// backs the single-precision path; the tensor pipeline reuses the chain
// operators and their adjoints for backpropagation.
namespace pyrk {

template <typename T>
void down2(const T* src, int w, int h, T* dst);  // dst: ceil(w/2) x ceil(h/2)

template <typename T>
void up2(const T* src, int w, int h, T* dst);  // dst: 2w x 2h

/// Adjoint of up2: accumulates d(out)/d(src)^T * gout into gsrc (gsrc is
/// overwritten). w, h are the SOURCE dimensions.
template <typename T>
void up2_adjoint(const T* gout, int w, int h, T* gsrc);

/// up2 applied `times` times starting from w x h.
template <typename T>
void upsample_chain(const T* src, int w, int h, int times, std::vector<T>& out);

/// Adjoint of upsample_chain; gout has dimensions (w*2^times, h*2^times).
template <typename T>
void upsample_chain_adjoint(const T* gout, int w, int h, int times,
                            std::vector<T>& gsrc);

template <typename T>
struct RawPair {
    std::vector<T> x_l, x_g;
    int w = 0, h = 0;    // x_l dims
    int gw = 0, gh = 0;  // x_g dims
    int n = 0;
};

/// Reformulate a raw plane whose dimensions divide 2^{n-1} (no padding).
template <typename T>
RawPair<T> reformulate_raw(const T* img, int w, int h, int n);

template <typename T>
std::vector<T> reconstruct_raw(const RawPair<T>& pair);

}  // namespace pyrk

}  // namespace wdrt
