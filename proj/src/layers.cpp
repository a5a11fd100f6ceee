#include "wdrt/layers.hpp"

#include <cmath>
#include <cstring>

namespace wdrt {

namespace {

// Zero-padded copy, (B,C,H+2R,W+2R). The shift-and-accumulate loops below
// then run branch-free over full rows.
template <typename T>
std::vector<T> make_padded(const Tensor4<T>& x, int r) {
    const int hp = x.h + 2 * r, wp = x.w + 2 * r;
    std::vector<T> xp(static_cast<size_t>(x.b) * x.c * hp * wp, T(0));
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < x.b; ++b) {
        for (int c = 0; c < x.c; ++c) {
            const T* src = x.plane_ptr(b, c);
            T* dst = xp.data() + (static_cast<size_t>(b) * x.c + c) * hp * wp;
            for (int y = 0; y < x.h; ++y) {
                std::memcpy(dst + static_cast<size_t>(y + r) * wp + r,
                            src + static_cast<size_t>(y) * x.w, sizeof(T) * x.w);
            }
        }
    }
    return xp;
}

template <typename T>
void check_conv(const Tensor4<T>& x, const ConvParams<T>& p) {
    if (x.c != p.in_ch) throw Error("conv2d: channel mismatch");
    if (p.k != 1 && p.k != 3) throw Error("conv2d: kernel size must be 1 or 3");
    if (p.kernels.size() != static_cast<size_t>(p.out_ch) * p.in_ch * p.k * p.k ||
        p.bias.size() != static_cast<size_t>(p.out_ch)) {
        throw Error("conv2d: parameter shape mismatch");
    }
}

}  // namespace

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const ConvParams<T>& p) {
    check_conv(x, p);
    const int B = x.b, C = x.c, H = x.h, W = x.w, OC = p.out_ch, K = p.k, R = K / 2;
    const int wp = W + 2 * R;
    const std::vector<T> xp = make_padded(x, R);
    const size_t pplane = static_cast<size_t>(H + 2 * R) * wp;

    Tensor4<T> y(B, OC, H, W);
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < B; ++b) {
        for (int oc = 0; oc < OC; ++oc) {
            T* yp = y.plane_ptr(b, oc);
            std::fill(yp, yp + y.plane(), p.bias[oc]);
            for (int ic = 0; ic < C; ++ic) {
                const T* xpl = xp.data() + (static_cast<size_t>(b) * C + ic) * pplane;
                for (int ky = 0; ky < K; ++ky) {
                    for (int kx = 0; kx < K; ++kx) {
                        const T wv = p.kernels[((static_cast<size_t>(oc) * C + ic) * K + ky) * K + kx];
                        for (int yy = 0; yy < H; ++yy) {
                            const T* src = xpl + static_cast<size_t>(yy + ky) * wp + kx;
                            T* dst = yp + static_cast<size_t>(yy) * W;
                            for (int xx = 0; xx < W; ++xx) dst[xx] += wv * src[xx];
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
void conv2d_backward(const Tensor4<T>& x, const ConvParams<T>& p,
                     const Tensor4<T>& grad_out, Tensor4<T>* grad_x,
                     ConvGrads<T>* grads) {
    check_conv(x, p);
    if (grad_out.b != x.b || grad_out.c != p.out_ch || grad_out.h != x.h ||
        grad_out.w != x.w) {
        throw Error("conv2d_backward: grad_out shape mismatch");
    }
    const int B = x.b, C = x.c, H = x.h, W = x.w, OC = p.out_ch, K = p.k, R = K / 2;
    const int wp = W + 2 * R, hp = H + 2 * R;
    const size_t pplane = static_cast<size_t>(hp) * wp;

    if (grads) {
        grads->bias.assign(OC, T(0));
        grads->kernels.assign(p.kernels.size(), T(0));

#pragma omp parallel for schedule(static)
        for (int oc = 0; oc < OC; ++oc) {
            T acc = T(0);
            for (int b = 0; b < B; ++b) {
                const T* g = grad_out.plane_ptr(b, oc);
                for (size_t i = 0; i < grad_out.plane(); ++i) acc += g[i];
            }
            grads->bias[oc] = acc;
        }

        const std::vector<T> xp = make_padded(x, R);
#pragma omp parallel for collapse(2) schedule(static)
        for (int oc = 0; oc < OC; ++oc) {
            for (int ic = 0; ic < C; ++ic) {
                for (int ky = 0; ky < K; ++ky) {
                    for (int kx = 0; kx < K; ++kx) {
                        T acc = T(0);
                        for (int b = 0; b < B; ++b) {
                            const T* g = grad_out.plane_ptr(b, oc);
                            const T* xpl =
                                xp.data() + (static_cast<size_t>(b) * C + ic) * pplane;
                            for (int yy = 0; yy < H; ++yy) {
                                const T* src = xpl + static_cast<size_t>(yy + ky) * wp + kx;
                                const T* gr = g + static_cast<size_t>(yy) * W;
                                for (int xx = 0; xx < W; ++xx) acc += gr[xx] * src[xx];
                            }
                        }
                        grads->kernels[((static_cast<size_t>(oc) * C + ic) * K + ky) * K + kx] = acc;
                    }
                }
            }
        }
    }

    if (grad_x) {
        *grad_x = Tensor4<T>(B, C, H, W);
        std::vector<T> gxp(static_cast<size_t>(B) * C * pplane, T(0));
#pragma omp parallel for collapse(2) schedule(static)
        for (int b = 0; b < B; ++b) {
            for (int ic = 0; ic < C; ++ic) {
                T* gpl = gxp.data() + (static_cast<size_t>(b) * C + ic) * pplane;
                for (int oc = 0; oc < OC; ++oc) {
                    const T* g = grad_out.plane_ptr(b, oc);
                    for (int ky = 0; ky < K; ++ky) {
                        for (int kx = 0; kx < K; ++kx) {
                            const T wv =
                                p.kernels[((static_cast<size_t>(oc) * C + ic) * K + ky) * K + kx];
                            for (int yy = 0; yy < H; ++yy) {
                                T* dst = gpl + static_cast<size_t>(yy + ky) * wp + kx;
                                const T* gr = g + static_cast<size_t>(yy) * W;
                                for (int xx = 0; xx < W; ++xx) dst[xx] += wv * gr[xx];
                            }
                        }
                    }
                }
                T* out = grad_x->plane_ptr(b, ic);
                for (int y = 0; y < H; ++y) {
                    std::memcpy(out + static_cast<size_t>(y) * W,
                                gpl + static_cast<size_t>(y + R) * wp + R, sizeof(T) * W);
                }
            }
        }
    }
}

template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& x, const BatchNormParams<T>& p,
                             Mode mode, BatchNormCache<T>* cache) {
    if (x.c != p.channels) throw Error("batchnorm: channel mismatch");
    const size_t n = static_cast<size_t>(x.b) * x.h * x.w;
    if (mode == Mode::Train && n < 2) {
        throw Error("batchnorm: train mode needs at least 2 elements per channel");
    }

    std::vector<T> mean(p.channels), var(p.channels);
    if (mode == Mode::Train) {
#pragma omp parallel for schedule(static)
        for (int c = 0; c < p.channels; ++c) {
            T sum = T(0);
            for (int b = 0; b < x.b; ++b) {
                const T* pl = x.plane_ptr(b, c);
                for (size_t i = 0; i < x.plane(); ++i) sum += pl[i];
            }
            const T mu = sum / static_cast<T>(n);
            T acc = T(0);
            for (int b = 0; b < x.b; ++b) {
                const T* pl = x.plane_ptr(b, c);
                for (size_t i = 0; i < x.plane(); ++i) {
                    const T d = pl[i] - mu;
                    acc += d * d;
                }
            }
            mean[c] = mu;
            var[c] = acc / static_cast<T>(n);
        }
    } else {
        mean = p.running_mean;
        var = p.running_var;
    }

    Tensor4<T> y(x.b, x.c, x.h, x.w);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < p.channels; ++c) {
        const T inv = T(1) / std::sqrt(var[c] + p.eps);
        const T g = p.gamma[c], bta = p.beta[c], mu = mean[c];
        for (int b = 0; b < x.b; ++b) {
            const T* src = x.plane_ptr(b, c);
            T* dst = y.plane_ptr(b, c);
            for (size_t i = 0; i < x.plane(); ++i) {
                dst[i] = g * (src[i] - mu) * inv + bta;
            }
        }
    }

    if (cache) {
        cache->mean = std::move(mean);
        cache->var = std::move(var);
        cache->mode = mode;
    }
    return y;
}

template <typename T>
void batchnorm_update_running(BatchNormParams<T>& p, const BatchNormCache<T>& cache) {
    for (int c = 0; c < p.channels; ++c) {
        p.running_mean[c] = p.momentum * p.running_mean[c] + (T(1) - p.momentum) * cache.mean[c];
        p.running_var[c] = p.momentum * p.running_var[c] + (T(1) - p.momentum) * cache.var[c];
    }
}

template <typename T>
void batchnorm_backward(const Tensor4<T>& x, const BatchNormParams<T>& p,
                        const BatchNormCache<T>& cache, const Tensor4<T>& grad_out,
                        Tensor4<T>* grad_x, BatchNormGrads<T>* grads) {
    if (!x.same_shape(grad_out)) throw Error("batchnorm_backward: shape mismatch");
    const size_t n = static_cast<size_t>(x.b) * x.h * x.w;

    if (grads) {
        grads->gamma.assign(p.channels, T(0));
        grads->beta.assign(p.channels, T(0));
    }
    if (grad_x) *grad_x = Tensor4<T>(x.b, x.c, x.h, x.w);

#pragma omp parallel for schedule(static)
    for (int c = 0; c < p.channels; ++c) {
        const T mu = cache.mean[c];
        const T inv = T(1) / std::sqrt(cache.var[c] + p.eps);
        T sum_g = T(0), sum_gx = T(0);
        for (int b = 0; b < x.b; ++b) {
            const T* g = grad_out.plane_ptr(b, c);
            const T* xv = x.plane_ptr(b, c);
            for (size_t i = 0; i < x.plane(); ++i) {
                sum_g += g[i];
                sum_gx += g[i] * (xv[i] - mu) * inv;
            }
        }
        if (grads) {
            grads->gamma[c] = sum_gx;
            grads->beta[c] = sum_g;
        }
        if (grad_x) {
            const T gam = p.gamma[c];
            if (cache.mode == Mode::Train) {
                const T scale = gam * inv / static_cast<T>(n);
                for (int b = 0; b < x.b; ++b) {
                    const T* g = grad_out.plane_ptr(b, c);
                    const T* xv = x.plane_ptr(b, c);
                    T* dst = grad_x->plane_ptr(b, c);
                    for (size_t i = 0; i < x.plane(); ++i) {
                        const T xhat = (xv[i] - mu) * inv;
                        dst[i] = scale * (static_cast<T>(n) * g[i] - sum_g - xhat * sum_gx);
                    }
                }
            } else {
                const T scale = gam * inv;
                for (int b = 0; b < x.b; ++b) {
                    const T* g = grad_out.plane_ptr(b, c);
                    T* dst = grad_x->plane_ptr(b, c);
                    for (size_t i = 0; i < x.plane(); ++i) dst[i] = scale * g[i];
                }
            }
        }
    }
}

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
    Tensor4<T> y(x.b, x.c, x.h, x.w);
#pragma omp parallel for schedule(static) if (x.size() > 65536)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(x.size()); ++i) {
        y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    }
    return y;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& grad_out) {
    if (!x.same_shape(grad_out)) throw Error("relu_backward: shape mismatch");
    Tensor4<T> g(x.b, x.c, x.h, x.w);
#pragma omp parallel for schedule(static) if (x.size() > 65536)
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(x.size()); ++i) {
        g.data[i] = x.data[i] > T(0) ? grad_out.data[i] : T(0);
    }
    return g;
}

template <typename T>
Tensor4<T> avgpool2_forward(const Tensor4<T>& x) {
    const int oh = x.h / 2, ow = x.w / 2;
    if (oh < 1 || ow < 1) throw Error("avgpool2: input too small");
    Tensor4<T> y(x.b, x.c, oh, ow);
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < x.b; ++b) {
        for (int c = 0; c < x.c; ++c) {
            const T* src = x.plane_ptr(b, c);
            T* dst = y.plane_ptr(b, c);
            for (int yy = 0; yy < oh; ++yy) {
                for (int xx = 0; xx < ow; ++xx) {
                    const size_t i0 = static_cast<size_t>(2 * yy) * x.w + 2 * xx;
                    dst[static_cast<size_t>(yy) * ow + xx] =
                        (src[i0] + src[i0 + 1] + src[i0 + x.w] + src[i0 + x.w + 1]) / T(4);
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor4<T> avgpool2_backward(int in_h, int in_w, const Tensor4<T>& grad_out) {
    Tensor4<T> g(grad_out.b, grad_out.c, in_h, in_w);
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < grad_out.b; ++b) {
        for (int c = 0; c < grad_out.c; ++c) {
            const T* go = grad_out.plane_ptr(b, c);
            T* dst = g.plane_ptr(b, c);
            for (int yy = 0; yy < grad_out.h; ++yy) {
                for (int xx = 0; xx < grad_out.w; ++xx) {
                    const T v = go[static_cast<size_t>(yy) * grad_out.w + xx] / T(4);
                    const size_t i0 = static_cast<size_t>(2 * yy) * in_w + 2 * xx;
                    dst[i0] = v;
                    dst[i0 + 1] = v;
                    dst[i0 + in_w] = v;
                    dst[i0 + in_w + 1] = v;
                }
            }
        }
    }
    return g;
}

template <typename T>
Tensor4<T> residual_block_forward(const Tensor4<T>& x,
                                  const ResidualBlockParams<T>& p, Mode mode,
                                  ResidualBlockCache<T>* cache) {
    ResidualBlockCache<T> local;
    ResidualBlockCache<T>& c = cache ? *cache : local;
    c.x = x;
    c.h1 = conv2d_forward(x, p.conv1);
    c.b1 = batchnorm_forward(c.h1, p.bn1, mode, &c.c1);
    c.r1 = relu_forward(c.b1);
    c.h2 = conv2d_forward(c.r1, p.conv2);
    Tensor4<T> b2 = batchnorm_forward(c.h2, p.bn2, mode, &c.c2);
    for (size_t i = 0; i < b2.size(); ++i) b2.data[i] += x.data[i];
    return b2;
}

template <typename T>
void residual_block_backward(const ResidualBlockParams<T>& p,
                             const ResidualBlockCache<T>& cache,
                             const Tensor4<T>& grad_out, Tensor4<T>* grad_x,
                             ResidualBlockGrads<T>* grads) {
    Tensor4<T> g_h2;
    batchnorm_backward(cache.h2, p.bn2, cache.c2, grad_out, &g_h2,
                       grads ? &grads->bn2 : nullptr);
    Tensor4<T> g_r1;
    conv2d_backward(cache.r1, p.conv2, g_h2, &g_r1, grads ? &grads->conv2 : nullptr);
    Tensor4<T> g_b1 = relu_backward(cache.b1, g_r1);
    Tensor4<T> g_h1;
    batchnorm_backward(cache.h1, p.bn1, cache.c1, g_b1, &g_h1,
                       grads ? &grads->bn1 : nullptr);
    Tensor4<T> g_in;
    conv2d_backward(cache.x, p.conv1, g_h1, grad_x ? &g_in : nullptr,
                    grads ? &grads->conv1 : nullptr);
    if (grad_x) {
        *grad_x = std::move(g_in);
        // identity skip
        for (size_t i = 0; i < grad_x->size(); ++i) grad_x->data[i] += grad_out.data[i];
    }
}

#define WDRT_INSTANTIATE_LAYERS(T)                                                     \
    template Tensor4<T> conv2d_forward<T>(const Tensor4<T>&, const ConvParams<T>&);    \
    template void conv2d_backward<T>(const Tensor4<T>&, const ConvParams<T>&,          \
                                     const Tensor4<T>&, Tensor4<T>*, ConvGrads<T>*);   \
    template Tensor4<T> batchnorm_forward<T>(const Tensor4<T>&,                        \
                                             const BatchNormParams<T>&, Mode,          \
                                             BatchNormCache<T>*);                      \
    template void batchnorm_update_running<T>(BatchNormParams<T>&,                     \
                                              const BatchNormCache<T>&);               \
    template void batchnorm_backward<T>(const Tensor4<T>&, const BatchNormParams<T>&,  \
                                        const BatchNormCache<T>&, const Tensor4<T>&,   \
                                        Tensor4<T>*, BatchNormGrads<T>*);              \
    template Tensor4<T> relu_forward<T>(const Tensor4<T>&);                            \
    template Tensor4<T> relu_backward<T>(const Tensor4<T>&, const Tensor4<T>&);        \
    template Tensor4<T> avgpool2_forward<T>(const Tensor4<T>&);                        \
    template Tensor4<T> avgpool2_backward<T>(int, int, const Tensor4<T>&);             \
    template Tensor4<T> residual_block_forward<T>(const Tensor4<T>&,                   \
                                                  const ResidualBlockParams<T>&, Mode, \
                                                  ResidualBlockCache<T>*);             \
    template void residual_block_backward<T>(const ResidualBlockParams<T>&,            \
                                             const ResidualBlockCache<T>&,             \
                                             const Tensor4<T>&, Tensor4<T>*,           \
                                             ResidualBlockGrads<T>*);

WDRT_INSTANTIATE_LAYERS(float)
WDRT_INSTANTIATE_LAYERS(double)

}  // namespace wdrt
