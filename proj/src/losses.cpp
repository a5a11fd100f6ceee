#include "wdrt/losses.hpp"

#include <cmath>

#include "wdrt/rng.hpp"
#include "wdrt/weights_io.hpp"

namespace wdrt {

namespace {

template <typename T>
void check_pair(const Tensor4<T>& a, const Tensor4<T>& b, const char* who) {
    if (!a.same_shape(b)) throw Error(std::string(who) + ": shape mismatch");
    if (a.size() == 0) throw Error(std::string(who) + ": empty tensors");
}

template <typename T>
T sign_of(T v) {
    if (v > T(0)) return T(1);
    if (v < T(0)) return T(-1);
    return T(0);
}

}  // namespace

template <typename T>
std::pair<T, Tensor4<T>> l1_loss(const Tensor4<T>& pred, const Tensor4<T>& target) {
    check_pair(pred, target, "l1_loss");
    const T invn = T(1) / static_cast<T>(pred.size());
    T acc = T(0);
    Tensor4<T> grad(pred.b, pred.c, pred.h, pred.w);
    for (size_t i = 0; i < pred.size(); ++i) {
        const T d = pred.data[i] - target.data[i];
        acc += std::fabs(d);
        grad.data[i] = sign_of(d) * invn;
    }
    return {acc * invn, std::move(grad)};
}

template <typename T>
std::pair<T, Tensor4<T>> l2_loss(const Tensor4<T>& pred, const Tensor4<T>& target) {
    check_pair(pred, target, "l2_loss");
    const T invn = T(1) / static_cast<T>(pred.size());
    T acc = T(0);
    Tensor4<T> grad(pred.b, pred.c, pred.h, pred.w);
    for (size_t i = 0; i < pred.size(); ++i) {
        const T d = pred.data[i] - target.data[i];
        acc += d * d;
        grad.data[i] = T(2) * d * invn;
    }
    return {acc * invn, std::move(grad)};
}

// ---------------------------------------------------------------------------
// SSIM

namespace {

std::vector<double> gaussian_window(int window, double sigma) {
    std::vector<double> g(static_cast<size_t>(window) * window);
    const int r = window / 2;
    double sum = 0.0;
    for (int y = 0; y < window; ++y) {
        for (int x = 0; x < window; ++x) {
            const double dx = x - r, dy = y - r;
            g[static_cast<size_t>(y) * window + x] =
                std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            sum += g[static_cast<size_t>(y) * window + x];
        }
    }
    for (double& v : g) v /= sum;
    return g;
}

struct SsimTerms {
    double value;
    double mu_x, mu_y, a1, a2, b1, b2;
};

SsimTerms ssim_window(const LuminanceImage& x, const LuminanceImage& y, int ox,
                      int oy, const std::vector<double>& g, int window, double c1,
                      double c2) {
    double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
    for (int wy = 0; wy < window; ++wy) {
        for (int wx = 0; wx < window; ++wx) {
            const double wgt = g[static_cast<size_t>(wy) * window + wx];
            const double xv = x.at(ox + wx, oy + wy);
            const double yv = y.at(ox + wx, oy + wy);
            mx += wgt * xv;
            my += wgt * yv;
            mxx += wgt * xv * xv;
            myy += wgt * yv * yv;
            mxy += wgt * xv * yv;
        }
    }
    const double vx = mxx - mx * mx;
    const double vy = myy - my * my;
    const double cxy = mxy - mx * my;
    SsimTerms t;
    t.mu_x = mx;
    t.mu_y = my;
    t.a1 = 2.0 * mx * my + c1;
    t.a2 = 2.0 * cxy + c2;
    t.b1 = mx * mx + my * my + c1;
    t.b2 = vx + vy + c2;
    t.value = (t.a1 * t.a2) / (t.b1 * t.b2);
    return t;
}

}  // namespace

double ssim(const LuminanceImage& x, const LuminanceImage& y, int window,
            double k1, double k2, double L) {
    if (x.width != y.width || x.height != y.height) {
        throw Error("ssim: dimension mismatch");
    }
    if (x.width < window || x.height < window) {
        throw Error("ssim: image smaller than window");
    }
    const double c1 = (k1 * L) * (k1 * L);
    const double c2 = (k2 * L) * (k2 * L);
    const std::vector<double> g = gaussian_window(window, 1.5);

    const int nx = x.width - window + 1, ny = x.height - window + 1;
    std::vector<double> row_sums(ny, 0.0);
#pragma omp parallel for schedule(static) if (ny >= 32)
    for (int oy = 0; oy < ny; ++oy) {
        double acc = 0.0;
        for (int ox = 0; ox < nx; ++ox) {
            acc += ssim_window(x, y, ox, oy, g, window, c1, c2).value;
        }
        row_sums[oy] = acc;
    }
    double total = 0.0;
    for (double v : row_sums) total += v;
    return total / (static_cast<double>(nx) * ny);
}

std::pair<double, LuminanceImage> dssim(const LuminanceImage& x,
                                        const LuminanceImage& y) {
    const int window = 11;
    if (x.width != y.width || x.height != y.height) {
        throw Error("dssim: dimension mismatch");
    }
    if (x.width < window || x.height < window) {
        throw Error("dssim: image smaller than window");
    }
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const std::vector<double> g = gaussian_window(window, 1.5);

    const int nx = x.width - window + 1, ny = x.height - window + 1;
    const double inv_count = 1.0 / (static_cast<double>(nx) * ny);
    LuminanceImage grad = LuminanceImage::zeros(x.width, x.height);
    double total = 0.0;
    // windows overlap, so the scatter accumulation stays serial
    for (int oy = 0; oy < ny; ++oy) {
        for (int ox = 0; ox < nx; ++ox) {
            const SsimTerms t = ssim_window(x, y, ox, oy, g, window, c1, c2);
            total += t.value;
            const double denom = t.b1 * t.b2;
            for (int wy = 0; wy < window; ++wy) {
                for (int wx = 0; wx < window; ++wx) {
                    const double wgt = g[static_cast<size_t>(wy) * window + wx];
                    const double xv = x.at(ox + wx, oy + wy);
                    const double yv = y.at(ox + wx, oy + wy);
                    const double ds =
                        (2.0 * wgt / denom) *
                        (t.mu_y * t.a2 + (yv - t.mu_y) * t.a1 -
                         t.value * (t.mu_x * t.b2 + (xv - t.mu_x) * t.b1));
                    // dssim = 1 - mean(S)
                    grad.at(ox + wx, oy + wy) -= ds * inv_count;
                }
            }
        }
    }
    return {1.0 - total * inv_count, std::move(grad)};
}

// ---------------------------------------------------------------------------
// Feature extractor

namespace {

template <typename T>
Tensor4<T> replicate3(const Tensor4<T>& x) {
    Tensor4<T> out(x.b, 3, x.h, x.w);
    for (int b = 0; b < x.b; ++b) {
        for (int c = 0; c < 3; ++c) {
            std::copy(x.plane_ptr(b, 0), x.plane_ptr(b, 0) + x.plane(),
                      out.plane_ptr(b, c));
        }
    }
    return out;
}

template <typename T>
struct ExtractorTrace {
    std::array<Tensor4<T>, 5> conv_out;  // pre-activation
    std::array<Tensor4<T>, 5> stage;     // post-activation taps
};

template <typename T>
void extractor_forward(const FeatureExtractor<T>& fx, const Tensor4<T>& x3,
                       ExtractorTrace<T>& tr) {
    tr.conv_out[0] = conv2d_forward(x3, fx.convs[0]);
    tr.stage[0] = relu_forward(tr.conv_out[0]);
    tr.conv_out[1] = conv2d_forward(tr.stage[0], fx.convs[1]);
    tr.stage[1] = relu_forward(tr.conv_out[1]);
    Tensor4<T> p2 = avgpool2_forward(tr.stage[1]);
    tr.conv_out[2] = conv2d_forward(p2, fx.convs[2]);
    tr.stage[2] = relu_forward(tr.conv_out[2]);
    tr.conv_out[3] = conv2d_forward(tr.stage[2], fx.convs[3]);
    tr.stage[3] = relu_forward(tr.conv_out[3]);
    Tensor4<T> p4 = avgpool2_forward(tr.stage[3]);
    tr.conv_out[4] = conv2d_forward(p4, fx.convs[4]);
    tr.stage[4] = relu_forward(tr.conv_out[4]);
}

// deterministic serial-order reduction
template <typename T>
T mean_abs_diff(const Tensor4<T>& a, const Tensor4<T>& b) {
    T acc = T(0);
    for (size_t i = 0; i < a.size(); ++i) acc += std::fabs(a.data[i] - b.data[i]);
    return acc / static_cast<T>(a.size());
}

}  // namespace

template <typename T>
FeatureExtractor<T> FeatureExtractor<T>::seeded(uint64_t seed) {
    FeatureExtractor<T> fx;
    Rng rng(seed);
    int in_ch = 3;
    for (int i = 0; i < 5; ++i) {
        fx.convs[i] = ConvParams<T>::zeros(kWidths[i], in_ch, 3);
        std::vector<double> buf(fx.convs[i].kernels.size());
        truncated_normal_fill(rng, buf, 0.1);
        for (size_t j = 0; j < buf.size(); ++j) {
            fx.convs[i].kernels[j] = static_cast<T>(buf[j]);
        }
        in_ch = kWidths[i];
    }
    return fx;
}

template <typename T>
FeatureExtractor<T> FeatureExtractor<T>::from_file(const std::filesystem::path& path) {
    const ModelWeights mw = load_weights(path);
    FeatureExtractor<T> fx;
    int in_ch = 3;
    for (int i = 0; i < 5; ++i) {
        const std::string base = "fx.conv" + std::to_string(i + 1);
        const NamedTensorF32* k = mw.find(base + ".kernels");
        if (!k) throw Error("feature extractor file missing tensor " + base + ".kernels");
        fx.convs[i] = ConvParams<T>::zeros(kWidths[i], in_ch, 3);
        if (k->data.size() != fx.convs[i].kernels.size()) {
            throw Error("feature extractor tensor " + base + " has wrong shape");
        }
        for (size_t j = 0; j < k->data.size(); ++j) {
            fx.convs[i].kernels[j] = static_cast<T>(k->data[j]);
        }
        if (const NamedTensorF32* bias = mw.find(base + ".bias")) {
            if (bias->data.size() != fx.convs[i].bias.size()) {
                throw Error("feature extractor tensor " + base + ".bias has wrong shape");
            }
            for (size_t j = 0; j < bias->data.size(); ++j) {
                fx.convs[i].bias[j] = static_cast<T>(bias->data[j]);
            }
        }
        in_ch = kWidths[i];
    }
    return fx;
}

template <typename T>
std::array<T, 5> feature_loss_stages(const Tensor4<T>& pred,
                                     const Tensor4<T>& target,
                                     const FeatureExtractor<T>& fx) {
    check_pair(pred, target, "feature_loss");
    if (pred.c != 1) throw Error("feature_loss: expected single-channel input");
    ExtractorTrace<T> tp, tt;
    extractor_forward(fx, replicate3(pred), tp);
    extractor_forward(fx, replicate3(target), tt);
    std::array<T, 5> out;
    for (int i = 0; i < 5; ++i) out[i] = mean_abs_diff(tp.stage[i], tt.stage[i]);
    return out;
}

template <typename T>
std::pair<T, Tensor4<T>> feature_loss(const Tensor4<T>& pred,
                                      const Tensor4<T>& target,
                                      const FeatureExtractor<T>& fx) {
    check_pair(pred, target, "feature_loss");
    if (pred.c != 1) throw Error("feature_loss: expected single-channel input");

    const Tensor4<T> x3 = replicate3(pred);
    ExtractorTrace<T> tp, tt;
    extractor_forward(fx, x3, tp);
    extractor_forward(fx, replicate3(target), tt);

    T total = T(0);
    std::array<Tensor4<T>, 5> dstage;
    for (int i = 0; i < 5; ++i) {
        total += mean_abs_diff(tp.stage[i], tt.stage[i]);
        const Tensor4<T>& a = tp.stage[i];
        const Tensor4<T>& b = tt.stage[i];
        dstage[i] = Tensor4<T>(a.b, a.c, a.h, a.w);
        const T invn = T(1) / static_cast<T>(a.size());
        for (size_t j = 0; j < a.size(); ++j) {
            dstage[i].data[j] = sign_of(a.data[j] - b.data[j]) * invn;
        }
    }

    // reverse pass through the frozen trunk, adding the tap gradients
    Tensor4<T> g = relu_backward(tp.conv_out[4], dstage[4]);
    Tensor4<T> g_p4;
    conv2d_backward<T>(avgpool2_forward(tp.stage[3]), fx.convs[4], g, &g_p4, nullptr);
    g = avgpool2_backward(tp.stage[3].h, tp.stage[3].w, g_p4);
    for (size_t j = 0; j < g.size(); ++j) g.data[j] += dstage[3].data[j];

    g = relu_backward(tp.conv_out[3], g);
    Tensor4<T> g_s2;
    conv2d_backward<T>(tp.stage[2], fx.convs[3], g, &g_s2, nullptr);
    for (size_t j = 0; j < g_s2.size(); ++j) g_s2.data[j] += dstage[2].data[j];

    g = relu_backward(tp.conv_out[2], g_s2);
    Tensor4<T> g_p2;
    conv2d_backward<T>(avgpool2_forward(tp.stage[1]), fx.convs[2], g, &g_p2, nullptr);
    g = avgpool2_backward(tp.stage[1].h, tp.stage[1].w, g_p2);
    for (size_t j = 0; j < g.size(); ++j) g.data[j] += dstage[1].data[j];

    g = relu_backward(tp.conv_out[1], g);
    Tensor4<T> g_s0;
    conv2d_backward<T>(tp.stage[0], fx.convs[1], g, &g_s0, nullptr);
    for (size_t j = 0; j < g_s0.size(); ++j) g_s0.data[j] += dstage[0].data[j];

    g = relu_backward(tp.conv_out[0], g_s0);
    Tensor4<T> g_x3;
    conv2d_backward<T>(x3, fx.convs[0], g, &g_x3, nullptr);

    Tensor4<T> grad(pred.b, 1, pred.h, pred.w);
    for (int b = 0; b < pred.b; ++b) {
        T* dst = grad.plane_ptr(b, 0);
        for (int c = 0; c < 3; ++c) {
            const T* src = g_x3.plane_ptr(b, c);
            for (size_t j = 0; j < grad.plane(); ++j) dst[j] += src[j];
        }
    }
    return {total, std::move(grad)};
}

template <typename T>
T weight_reg(const std::vector<std::span<const T>>& kernel_blocks,
             std::vector<std::vector<T>>* grads) {
    T acc = T(0);
    if (grads) grads->clear();
    for (const auto& block : kernel_blocks) {
        std::vector<T> g;
        if (grads) g.resize(block.size());
        for (size_t i = 0; i < block.size(); ++i) {
            acc += block[i] * block[i];
            if (grads) g[i] = T(2) * block[i];
        }
        if (grads) grads->push_back(std::move(g));
    }
    return acc;
}

namespace {

template <typename T>
CompositeParts<T> composite_pixel_feature(const Tensor4<T>& pred,
                                          const Tensor4<T>& target,
                                          const std::vector<std::span<const T>>& theta,
                                          T alpha, T beta, T gamma, bool use_l2,
                                          const FeatureExtractor<T>& fx) {
    CompositeParts<T> parts;
    auto [pix, dpix] = use_l2 ? l2_loss(pred, target) : l1_loss(pred, target);
    auto [feat, dfeat] = feature_loss(pred, target, fx);
    parts.pixel = pix;
    parts.feature = feat;
    parts.reg = weight_reg<T>(theta, nullptr);
    parts.total = alpha * pix + beta * feat + gamma * parts.reg;
    parts.grad_pred = Tensor4<T>(pred.b, pred.c, pred.h, pred.w);
    for (size_t i = 0; i < pred.size(); ++i) {
        parts.grad_pred.data[i] = alpha * dpix.data[i] + beta * dfeat.data[i];
    }
    return parts;
}

}  // namespace

template <typename T>
CompositeParts<T> composite_global(const Tensor4<T>& pred, const Tensor4<T>& target,
                                   const std::vector<std::span<const T>>& theta_kernels,
                                   const LossWeights<T>& w,
                                   const FeatureExtractor<T>& fx) {
    return composite_pixel_feature(pred, target, theta_kernels, w.alpha, w.beta,
                                   w.gamma, false, fx);
}

template <typename T>
CompositeParts<T> composite_local(const Tensor4<T>& pred, const Tensor4<T>& target,
                                  const std::vector<std::span<const T>>& theta_kernels,
                                  const LossWeights<T>& w,
                                  const FeatureExtractor<T>& fx) {
    return composite_pixel_feature(pred, target, theta_kernels, w.alpha, w.beta,
                                   w.gamma, false, fx);
}

template <typename T>
CompositeParts<T> composite_finetune(const Tensor4<T>& pred, const Tensor4<T>& target,
                                     const FineTuneLossWeights<T>& w,
                                     const FeatureExtractor<T>& fx) {
    return composite_pixel_feature(pred, target, {}, w.alpha_t, w.beta_t, T(0), true,
                                   fx);
}

#define WDRT_INSTANTIATE_LOSSES(T)                                                    \
    template std::pair<T, Tensor4<T>> l1_loss<T>(const Tensor4<T>&,                   \
                                                 const Tensor4<T>&);                  \
    template std::pair<T, Tensor4<T>> l2_loss<T>(const Tensor4<T>&,                   \
                                                 const Tensor4<T>&);                  \
    template struct FeatureExtractor<T>;                                              \
    template std::pair<T, Tensor4<T>> feature_loss<T>(                                \
        const Tensor4<T>&, const Tensor4<T>&, const FeatureExtractor<T>&);            \
    template std::array<T, 5> feature_loss_stages<T>(                                 \
        const Tensor4<T>&, const Tensor4<T>&, const FeatureExtractor<T>&);            \
    template T weight_reg<T>(const std::vector<std::span<const T>>&,                  \
                             std::vector<std::vector<T>>*);                           \
    template CompositeParts<T> composite_global<T>(                                   \
        const Tensor4<T>&, const Tensor4<T>&, const std::vector<std::span<const T>>&, \
        const LossWeights<T>&, const FeatureExtractor<T>&);                           \
    template CompositeParts<T> composite_local<T>(                                    \
        const Tensor4<T>&, const Tensor4<T>&, const std::vector<std::span<const T>>&, \
        const LossWeights<T>&, const FeatureExtractor<T>&);                           \
    template CompositeParts<T> composite_finetune<T>(                                 \
        const Tensor4<T>&, const Tensor4<T>&, const FineTuneLossWeights<T>&,          \
        const FeatureExtractor<T>&);

WDRT_INSTANTIATE_LOSSES(float)
WDRT_INSTANTIATE_LOSSES(double)

}  // namespace wdrt
