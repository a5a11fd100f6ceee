#include "wdrt/networks.hpp"

#include <algorithm>
#include <cmath>

namespace wdrt {

template <typename T>
Tensor4<T> forward_compression(const Tensor4<T>& x, const CompressionNet<T>& net,
                               Mode mode, CompressionNetCache<T>* cache) {
    if (x.c != 1) throw Error("compression net expects a single input channel");
    CompressionNetCache<T> local;
    CompressionNetCache<T>& c = cache ? *cache : local;
    c.x = x;
    const Tensor4<T>* cur = &c.x;
    for (int i = 0; i < 4; ++i) {
        c.h[i] = conv2d_forward(*cur, net.conv[i]);
        c.bno[i] = batchnorm_forward(c.h[i], net.bn[i], mode, &c.bnc[i]);
        c.r[i] = relu_forward(c.bno[i]);
        cur = &c.r[i];
    }
    Tensor4<T> out = conv2d_forward(*cur, net.head);
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += x.data[i];
    return out;
}

template <typename T>
void backward_compression(const CompressionNet<T>& net,
                          const CompressionNetCache<T>& cache,
                          const Tensor4<T>& grad_out, Tensor4<T>* grad_x,
                          CompressionNetGrads<T>* grads) {
    Tensor4<T> g;
    conv2d_backward(cache.r[3], net.head, grad_out, &g, grads ? &grads->head : nullptr);
    for (int i = 3; i >= 0; --i) {
        Tensor4<T> g_bno = relu_backward(cache.bno[i], g);
        Tensor4<T> g_h;
        batchnorm_backward(cache.h[i], net.bn[i], cache.bnc[i], g_bno, &g_h,
                           grads ? &grads->bn[i] : nullptr);
        const Tensor4<T>& input = i == 0 ? cache.x : cache.r[i - 1];
        const bool need_input_grad = i > 0 || grad_x != nullptr;
        Tensor4<T> g_in;
        conv2d_backward(input, net.conv[i], g_h, need_input_grad ? &g_in : nullptr,
                        grads ? &grads->conv[i] : nullptr);
        g = std::move(g_in);
    }
    if (grad_x) {
        *grad_x = std::move(g);
        // global input skip
        for (size_t i = 0; i < grad_x->size(); ++i) grad_x->data[i] += grad_out.data[i];
    }
}

template <typename T>
void update_running_stats(CompressionNet<T>& net, const CompressionNetCache<T>& cache) {
    for (int i = 0; i < 4; ++i) batchnorm_update_running(net.bn[i], cache.bnc[i]);
}

template <typename T>
Tensor4<T> forward_finetune(const Tensor4<T>& x, const FineTuneNet<T>& net, Mode mode,
                            FineTuneNetCache<T>* cache) {
    if (x.c != 1) throw Error("fine tune net expects a single input channel");
    FineTuneNetCache<T> local;
    FineTuneNetCache<T>& c = cache ? *cache : local;
    c.x = x;
    c.s = conv2d_forward(x, net.stem);
    const Tensor4<T>* cur = &c.s;
    for (int i = 0; i < 4; ++i) {
        c.block_out[i] = residual_block_forward(*cur, net.blocks[i], mode, &c.blocks[i]);
        cur = &c.block_out[i];
    }
    Tensor4<T> out = conv2d_forward(*cur, net.head);
    for (size_t i = 0; i < out.size(); ++i) out.data[i] += x.data[i];
    return out;
}

template <typename T>
void backward_finetune(const FineTuneNet<T>& net, const FineTuneNetCache<T>& cache,
                       const Tensor4<T>& grad_out, Tensor4<T>* grad_x,
                       FineTuneNetGrads<T>* grads) {
    Tensor4<T> g;
    conv2d_backward(cache.block_out[3], net.head, grad_out, &g,
                    grads ? &grads->head : nullptr);
    for (int i = 3; i >= 0; --i) {
        Tensor4<T> g_in;
        residual_block_backward(net.blocks[i], cache.blocks[i], g, &g_in,
                                grads ? &grads->blocks[i] : nullptr);
        g = std::move(g_in);
    }
    Tensor4<T> g_x;
    conv2d_backward(cache.x, net.stem, g, grad_x ? &g_x : nullptr,
                    grads ? &grads->stem : nullptr);
    if (grad_x) {
        *grad_x = std::move(g_x);
        for (size_t i = 0; i < grad_x->size(); ++i) grad_x->data[i] += grad_out.data[i];
    }
}

template <typename T>
void update_running_stats(FineTuneNet<T>& net, const FineTuneNetCache<T>& cache) {
    for (int i = 0; i < 4; ++i) {
        batchnorm_update_running(net.blocks[i].bn1, cache.blocks[i].c1);
        batchnorm_update_running(net.blocks[i].bn2, cache.blocks[i].c2);
    }
}

// ---------------------------------------------------------------------------
// Parameter enumeration

namespace {

template <typename T>
void conv_refs(std::vector<ParamRef<T>>& out, ConvParams<T>& p, const std::string& name) {
    out.push_back({name + ".kernels", &p.kernels, ParamKind::ConvKernel,
                   {static_cast<uint32_t>(p.out_ch), static_cast<uint32_t>(p.in_ch),
                    static_cast<uint32_t>(p.k), static_cast<uint32_t>(p.k)}});
    out.push_back({name + ".bias", &p.bias, ParamKind::ConvBias,
                   {static_cast<uint32_t>(p.out_ch)}});
}

template <typename T>
void bn_refs(std::vector<ParamRef<T>>& out, BatchNormParams<T>& p, const std::string& name) {
    const uint32_t c = static_cast<uint32_t>(p.channels);
    out.push_back({name + ".gamma", &p.gamma, ParamKind::BnGamma, {c}});
    out.push_back({name + ".beta", &p.beta, ParamKind::BnBeta, {c}});
    out.push_back({name + ".running_mean", &p.running_mean, ParamKind::BnRunningMean, {c}});
    out.push_back({name + ".running_var", &p.running_var, ParamKind::BnRunningVar, {c}});
}

}  // namespace

template <typename T>
std::vector<ParamRef<T>> param_refs(CompressionNet<T>& net, const std::string& prefix) {
    std::vector<ParamRef<T>> out;
    for (int i = 0; i < 4; ++i) {
        conv_refs(out, net.conv[i], prefix + ".conv" + std::to_string(i + 1));
        bn_refs(out, net.bn[i], prefix + ".bn" + std::to_string(i + 1));
    }
    conv_refs(out, net.head, prefix + ".head");
    return out;
}

template <typename T>
std::vector<ParamRef<T>> param_refs(FineTuneNet<T>& net, const std::string& prefix) {
    std::vector<ParamRef<T>> out;
    conv_refs(out, net.stem, prefix + ".stem");
    for (int i = 0; i < 4; ++i) {
        const std::string b = prefix + ".block" + std::to_string(i + 1);
        conv_refs(out, net.blocks[i].conv1, b + ".conv1");
        bn_refs(out, net.blocks[i].bn1, b + ".bn1");
        conv_refs(out, net.blocks[i].conv2, b + ".conv2");
        bn_refs(out, net.blocks[i].bn2, b + ".bn2");
    }
    conv_refs(out, net.head, prefix + ".head");
    return out;
}

template <typename T>
std::vector<ParamRef<T>> param_refs(TmoModel<T>& model) {
    std::vector<ParamRef<T>> out = param_refs(model.fg, "fg");
    std::vector<ParamRef<T>> fl = param_refs(model.fl, "fl");
    std::vector<ParamRef<T>> ft = param_refs(model.ft, "ft");
    out.insert(out.end(), std::make_move_iterator(fl.begin()), std::make_move_iterator(fl.end()));
    out.insert(out.end(), std::make_move_iterator(ft.begin()), std::make_move_iterator(ft.end()));
    return out;
}

// Grad lists follow the param_refs order, with nulls for the running stats
// so the two sequences zip index-by-index.
template <typename T>
std::vector<std::vector<T>*> grad_refs(CompressionNetGrads<T>& g) {
    std::vector<std::vector<T>*> out;
    for (int i = 0; i < 4; ++i) {
        out.push_back(&g.conv[i].kernels);
        out.push_back(&g.conv[i].bias);
        out.push_back(&g.bn[i].gamma);
        out.push_back(&g.bn[i].beta);
        out.push_back(nullptr);
        out.push_back(nullptr);
    }
    out.push_back(&g.head.kernels);
    out.push_back(&g.head.bias);
    return out;
}

template <typename T>
std::vector<std::vector<T>*> grad_refs(FineTuneNetGrads<T>& g) {
    std::vector<std::vector<T>*> out;
    out.push_back(&g.stem.kernels);
    out.push_back(&g.stem.bias);
    for (int i = 0; i < 4; ++i) {
        out.push_back(&g.blocks[i].conv1.kernels);
        out.push_back(&g.blocks[i].conv1.bias);
        out.push_back(&g.blocks[i].bn1.gamma);
        out.push_back(&g.blocks[i].bn1.beta);
        out.push_back(nullptr);
        out.push_back(nullptr);
        out.push_back(&g.blocks[i].conv2.kernels);
        out.push_back(&g.blocks[i].conv2.bias);
        out.push_back(&g.blocks[i].bn2.gamma);
        out.push_back(&g.blocks[i].bn2.beta);
        out.push_back(nullptr);
        out.push_back(nullptr);
    }
    out.push_back(&g.head.kernels);
    out.push_back(&g.head.bias);
    return out;
}

template <typename T>
std::vector<std::vector<T>*> grad_refs(TmoModelGrads<T>& g) {
    std::vector<std::vector<T>*> out = grad_refs(g.fg);
    std::vector<std::vector<T>*> fl = grad_refs(g.fl);
    std::vector<std::vector<T>*> ft = grad_refs(g.ft);
    out.insert(out.end(), fl.begin(), fl.end());
    out.insert(out.end(), ft.begin(), ft.end());
    return out;
}

template <typename T>
std::vector<std::span<const T>> kernel_blocks(const CompressionNet<T>& net) {
    std::vector<std::span<const T>> out;
    for (int i = 0; i < 4; ++i) out.emplace_back(net.conv[i].kernels);
    out.emplace_back(net.head.kernels);
    return out;
}

template <typename T>
std::vector<std::span<const T>> kernel_blocks(const FineTuneNet<T>& net) {
    std::vector<std::span<const T>> out;
    out.emplace_back(net.stem.kernels);
    for (int i = 0; i < 4; ++i) {
        out.emplace_back(net.blocks[i].conv1.kernels);
        out.emplace_back(net.blocks[i].conv2.kernels);
    }
    out.emplace_back(net.head.kernels);
    return out;
}

// ---------------------------------------------------------------------------
// Band recombination

template <typename T>
Tensor4<T> reconstruct_tensor(const Tensor4<T>& x_l, const Tensor4<T>& x_g, int n) {
    const int shift = n - 1;
    if (x_l.b != x_g.b || x_l.c != 1 || x_g.c != 1 ||
        x_l.h != x_g.h << shift || x_l.w != x_g.w << shift) {
        throw Error("reconstruct_tensor: dimension relation violated");
    }
    Tensor4<T> out(x_l.b, 1, x_l.h, x_l.w);
    for (int b = 0; b < x_l.b; ++b) {
        std::vector<T> up;
        pyrk::upsample_chain(x_g.plane_ptr(b, 0), x_g.w, x_g.h, shift, up);
        const T* lo = x_l.plane_ptr(b, 0);
        T* dst = out.plane_ptr(b, 0);
        for (size_t i = 0; i < out.plane(); ++i) dst[i] = lo[i] + up[i];
    }
    return out;
}

template <typename T>
void reconstruct_tensor_backward(const Tensor4<T>& grad_out, int n,
                                 Tensor4<T>* grad_x_l, Tensor4<T>* grad_x_g) {
    const int shift = n - 1;
    if (grad_x_l) *grad_x_l = grad_out;
    if (grad_x_g) {
        const int gw = grad_out.w >> shift, gh = grad_out.h >> shift;
        *grad_x_g = Tensor4<T>(grad_out.b, 1, gh, gw);
        for (int b = 0; b < grad_out.b; ++b) {
            std::vector<T> g;
            pyrk::upsample_chain_adjoint(grad_out.plane_ptr(b, 0), gw, gh, shift, g);
            std::copy(g.begin(), g.end(), grad_x_g->plane_ptr(b, 0));
        }
    }
}

// ---------------------------------------------------------------------------
// Serialization

template <typename T>
ModelWeights pack_model(const TmoModel<T>& model, uint32_t n, NormMode mode) {
    ModelWeights w;
    w.n = n;
    w.norm_mode = mode;
    auto refs = param_refs(const_cast<TmoModel<T>&>(model));
    for (const ParamRef<T>& r : refs) {
        NamedTensorF32& t = w.add(r.name, r.dims);
        for (size_t i = 0; i < r.data->size(); ++i) {
            t.data[i] = static_cast<float>((*r.data)[i]);
        }
    }
    return w;
}

template <typename T>
void unpack_model(const ModelWeights& w, TmoModel<T>& model) {
    auto refs = param_refs(model);
    for (ParamRef<T>& r : refs) {
        const NamedTensorF32* t = w.find(r.name);
        if (!t) throw Error("weight container missing tensor " + r.name);
        if (t->dims != r.dims) {
            throw Error("tensor " + r.name + " shape does not match the architecture");
        }
        if (t->data.size() != r.data->size()) {
            throw Error("tensor " + r.name + " element count mismatch");
        }
        for (size_t i = 0; i < t->data.size(); ++i) {
            (*r.data)[i] = static_cast<T>(t->data[i]);
        }
    }
}

LuminanceImage tonemap(const LuminanceImage& x, const ModelWeights& weights, int n) {
    if (n < 2) throw Error("tonemap: band count must be >= 2");
    if (static_cast<uint32_t>(n) != weights.n) {
        throw Error("tonemap: requested n=" + std::to_string(n) +
                    " but weights were trained with n=" + std::to_string(weights.n));
    }
    TmoModel<double> model = TmoModel<double>::zeros();
    unpack_model(weights, model);

    const ReformulatedPair pair = reformulate(x, n);
    const Tensor4<double> xg = tensor_from_image<double>(pair.x_g);
    const Tensor4<double> xl = tensor_from_image<double>(pair.x_l);

    const Tensor4<double> yg = forward_compression(xg, model.fg, Mode::Eval);
    const Tensor4<double> yl = forward_compression(xl, model.fl, Mode::Eval);
    const Tensor4<double> recon = reconstruct_tensor(yl, yg, n);
    Tensor4<double> out = forward_finetune(recon, model.ft, Mode::Eval);

    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return crop_pad(image_from_tensor(out), pair.pad);
}

#define WDRT_INSTANTIATE_NETWORKS(T)                                                  \
    template Tensor4<T> forward_compression<T>(const Tensor4<T>&,                     \
                                               const CompressionNet<T>&, Mode,        \
                                               CompressionNetCache<T>*);              \
    template void backward_compression<T>(const CompressionNet<T>&,                   \
                                          const CompressionNetCache<T>&,              \
                                          const Tensor4<T>&, Tensor4<T>*,             \
                                          CompressionNetGrads<T>*);                   \
    template void update_running_stats<T>(CompressionNet<T>&,                         \
                                          const CompressionNetCache<T>&);             \
    template Tensor4<T> forward_finetune<T>(const Tensor4<T>&, const FineTuneNet<T>&, \
                                            Mode, FineTuneNetCache<T>*);              \
    template void backward_finetune<T>(const FineTuneNet<T>&,                         \
                                       const FineTuneNetCache<T>&, const Tensor4<T>&, \
                                       Tensor4<T>*, FineTuneNetGrads<T>*);            \
    template void update_running_stats<T>(FineTuneNet<T>&, const FineTuneNetCache<T>&); \
    template std::vector<ParamRef<T>> param_refs<T>(CompressionNet<T>&,               \
                                                    const std::string&);              \
    template std::vector<ParamRef<T>> param_refs<T>(FineTuneNet<T>&,                  \
                                                    const std::string&);              \
    template std::vector<ParamRef<T>> param_refs<T>(TmoModel<T>&);                    \
    template std::vector<std::vector<T>*> grad_refs<T>(CompressionNetGrads<T>&);      \
    template std::vector<std::vector<T>*> grad_refs<T>(FineTuneNetGrads<T>&);         \
    template std::vector<std::vector<T>*> grad_refs<T>(TmoModelGrads<T>&);            \
    template std::vector<std::span<const T>> kernel_blocks<T>(                        \
        const CompressionNet<T>&);                                                    \
    template std::vector<std::span<const T>> kernel_blocks<T>(const FineTuneNet<T>&); \
    template Tensor4<T> reconstruct_tensor<T>(const Tensor4<T>&, const Tensor4<T>&,   \
                                              int);                                   \
    template void reconstruct_tensor_backward<T>(const Tensor4<T>&, int, Tensor4<T>*, \
                                                 Tensor4<T>*);                        \
    template ModelWeights pack_model<T>(const TmoModel<T>&, uint32_t, NormMode);      \
    template void unpack_model<T>(const ModelWeights&, TmoModel<T>&);

WDRT_INSTANTIATE_NETWORKS(float)
WDRT_INSTANTIATE_NETWORKS(double)

}  // namespace wdrt
