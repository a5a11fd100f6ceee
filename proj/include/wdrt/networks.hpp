#pragma once

#include <array>
#include <functional>

#include "wdrt/layers.hpp"
#include "wdrt/pyramid.hpp"
#include "wdrt/weights_io.hpp"

namespace wdrt {

/// Four 3x3/32 conv+BN+ReLU stages, a linear 1x1 head and a global input
/// skip: out = x + head(features). Instantiated twice, as the global
/// compression network on x_g and the local manipulation network on x_l.
template <typename T>
struct CompressionNet {
    std::array<ConvParams<T>, 4> conv;
    std::array<BatchNormParams<T>, 4> bn;
    ConvParams<T> head;

    static CompressionNet zeros(int width = 32) {
        CompressionNet net;
        net.conv[0] = ConvParams<T>::zeros(width, 1, 3);
        for (int i = 1; i < 4; ++i) net.conv[i] = ConvParams<T>::zeros(width, width, 3);
        for (int i = 0; i < 4; ++i) net.bn[i] = BatchNormParams<T>::identity(width);
        net.head = ConvParams<T>::zeros(1, width, 1);
        return net;
    }
};

template <typename T>
struct CompressionNetGrads {
    std::array<ConvGrads<T>, 4> conv;
    std::array<BatchNormGrads<T>, 4> bn;
    ConvGrads<T> head;
};

template <typename T>
struct CompressionNetCache {
    Tensor4<T> x;
    std::array<Tensor4<T>, 4> h;    // conv outputs
    std::array<Tensor4<T>, 4> bno;  // batch-norm outputs
    std::array<Tensor4<T>, 4> r;    // relu outputs
    std::array<BatchNormCache<T>, 4> bnc;
};

/// Stem conv lifting 1 channel to 32, four residual blocks, linear 1x1 head
/// and a global input skip.
template <typename T>
struct FineTuneNet {
    ConvParams<T> stem;
    std::array<ResidualBlockParams<T>, 4> blocks;
    ConvParams<T> head;

    static FineTuneNet zeros(int width = 32) {
        FineTuneNet net;
        net.stem = ConvParams<T>::zeros(width, 1, 3);
        for (int i = 0; i < 4; ++i) net.blocks[i] = ResidualBlockParams<T>::zeros(width);
        net.head = ConvParams<T>::zeros(1, width, 1);
        return net;
    }
};

template <typename T>
struct FineTuneNetGrads {
    ConvGrads<T> stem;
    std::array<ResidualBlockGrads<T>, 4> blocks;
    ConvGrads<T> head;
};

template <typename T>
struct FineTuneNetCache {
    Tensor4<T> x, s;
    std::array<Tensor4<T>, 4> block_out;
    std::array<ResidualBlockCache<T>, 4> blocks;
};

template <typename T>
Tensor4<T> forward_compression(const Tensor4<T>& x, const CompressionNet<T>& net,
                               Mode mode, CompressionNetCache<T>* cache = nullptr);

template <typename T>
void backward_compression(const CompressionNet<T>& net,
                          const CompressionNetCache<T>& cache,
                          const Tensor4<T>& grad_out, Tensor4<T>* grad_x,
                          CompressionNetGrads<T>* grads);

template <typename T>
void update_running_stats(CompressionNet<T>& net, const CompressionNetCache<T>& cache);

template <typename T>
Tensor4<T> forward_finetune(const Tensor4<T>& x, const FineTuneNet<T>& net, Mode mode,
                            FineTuneNetCache<T>* cache = nullptr);

template <typename T>
void backward_finetune(const FineTuneNet<T>& net, const FineTuneNetCache<T>& cache,
                       const Tensor4<T>& grad_out, Tensor4<T>* grad_x,
                       FineTuneNetGrads<T>* grads);

template <typename T>
void update_running_stats(FineTuneNet<T>& net, const FineTuneNetCache<T>& cache);

/// x_g and x_l share the architecture; f_g consumes the low band, f_l the
/// high band, f_t refines the recombination.
template <typename T>
inline Tensor4<T> forward_global(const Tensor4<T>& x_g, const CompressionNet<T>& net,
                                 Mode mode, CompressionNetCache<T>* cache = nullptr) {
    return forward_compression(x_g, net, mode, cache);
}
template <typename T>
inline Tensor4<T> forward_local(const Tensor4<T>& x_l, const CompressionNet<T>& net,
                                Mode mode, CompressionNetCache<T>* cache = nullptr) {
    return forward_compression(x_l, net, mode, cache);
}

/// The three sub-networks of the tone-mapping pipeline.
template <typename T>
struct TmoModel {
    CompressionNet<T> fg, fl;
    FineTuneNet<T> ft;

    static TmoModel zeros() {
        return {CompressionNet<T>::zeros(), CompressionNet<T>::zeros(),
                FineTuneNet<T>::zeros()};
    }
};

template <typename T>
struct TmoModelGrads {
    CompressionNetGrads<T> fg, fl;
    FineTuneNetGrads<T> ft;
};

enum class ParamKind {
    ConvKernel,
    ConvBias,
    BnGamma,
    BnBeta,
    BnRunningMean,
    BnRunningVar,
};

inline bool is_trainable(ParamKind k) {
    return k != ParamKind::BnRunningMean && k != ParamKind::BnRunningVar;
}

template <typename T>
struct ParamRef {
    std::string name;
    std::vector<T>* data = nullptr;
    ParamKind kind = ParamKind::ConvKernel;
    std::vector<uint32_t> dims;
};

/// Named views over every parameter tensor, in a fixed order. The same
/// order is produced for the matching grads structs, so the two lists zip.
template <typename T>
std::vector<ParamRef<T>> param_refs(CompressionNet<T>& net, const std::string& prefix);
template <typename T>
std::vector<ParamRef<T>> param_refs(FineTuneNet<T>& net, const std::string& prefix);
template <typename T>
std::vector<ParamRef<T>> param_refs(TmoModel<T>& model);

template <typename T>
std::vector<std::vector<T>*> grad_refs(CompressionNetGrads<T>& g);
template <typename T>
std::vector<std::vector<T>*> grad_refs(FineTuneNetGrads<T>& g);
template <typename T>
std::vector<std::vector<T>*> grad_refs(TmoModelGrads<T>& g);

/// Convolution kernel blocks of a net, for the l2 regularizer.
template <typename T>
std::vector<std::span<const T>> kernel_blocks(const CompressionNet<T>& net);
template <typename T>
std::vector<std::span<const T>> kernel_blocks(const FineTuneNet<T>& net);

/// up^{n-1}(x_g) + x_l per batch item.
template <typename T>
Tensor4<T> reconstruct_tensor(const Tensor4<T>& x_l, const Tensor4<T>& x_g, int n);

/// Adjoint of reconstruct_tensor: splits the incoming gradient into the two
/// band gradients.
template <typename T>
void reconstruct_tensor_backward(const Tensor4<T>& grad_out, int n,
                                 Tensor4<T>* grad_x_l, Tensor4<T>* grad_x_g);

template <typename T>
ModelWeights pack_model(TmoModel<T>& model, uint32_t n, NormMode mode);

/// Inverse of pack_model; throws when a tensor is missing or its shape does
/// not match the declared architecture.
template <typename T>
void unpack_model(const ModelWeights& w, TmoModel<T>& model);

/// Full luminance pipeline with eval-mode batch norm:
/// pad+reformulate -> f_g, f_l -> reconstruct -> f_t -> clamp -> crop.
/// `x` must already be normalized into [0,1]; `n` must match the metadata.
LuminanceImage tonemap(const LuminanceImage& x, const ModelWeights& weights, int n);

}  // namespace wdrt
