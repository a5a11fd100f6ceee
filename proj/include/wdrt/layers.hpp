#pragma once

#include "wdrt/tensor.hpp"

namespace wdrt {

enum class Mode { Train, Eval };

/// Cross-correlation parameters, kernels shaped (out_ch, in_ch, k, k).
template <typename T>
struct ConvParams {
    int out_ch = 0, in_ch = 0, k = 3;
    std::vector<T> kernels;
    std::vector<T> bias;

    static ConvParams zeros(int out_ch, int in_ch, int k) {
        ConvParams p;
        p.out_ch = out_ch;
        p.in_ch = in_ch;
        p.k = k;
        p.kernels.assign(static_cast<size_t>(out_ch) * in_ch * k * k, T(0));
        p.bias.assign(out_ch, T(0));
        return p;
    }
    size_t kernel_count() const { return kernels.size(); }
};

template <typename T>
struct ConvGrads {
    std::vector<T> kernels;
    std::vector<T> bias;
};

template <typename T>
struct BatchNormParams {
    int channels = 0;
    std::vector<T> gamma, beta, running_mean, running_var;
    T eps = T(1e-5);
    T momentum = T(0.99);

    static BatchNormParams identity(int channels) {
        BatchNormParams p;
        p.channels = channels;
        p.gamma.assign(channels, T(1));
        p.beta.assign(channels, T(0));
        p.running_mean.assign(channels, T(0));
        p.running_var.assign(channels, T(1));
        return p;
    }
};

template <typename T>
struct BatchNormGrads {
    std::vector<T> gamma, beta;
};

/// Statistics the forward pass normalized with; train mode also feeds these
/// into the running averages via batchnorm_update_running.
template <typename T>
struct BatchNormCache {
    std::vector<T> mean, var;
    Mode mode = Mode::Train;
};

/// Stride-1 same-padded cross-correlation, k in {1,3}.
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const ConvParams<T>& p);

/// Exact gradients of conv2d_forward. Either output may be null.
template <typename T>
void conv2d_backward(const Tensor4<T>& x, const ConvParams<T>& p,
                     const Tensor4<T>& grad_out, Tensor4<T>* grad_x,
                     ConvGrads<T>* grads);

template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& x, const BatchNormParams<T>& p,
                             Mode mode, BatchNormCache<T>* cache);

template <typename T>
void batchnorm_update_running(BatchNormParams<T>& p, const BatchNormCache<T>& cache);

template <typename T>
void batchnorm_backward(const Tensor4<T>& x, const BatchNormParams<T>& p,
                        const BatchNormCache<T>& cache, const Tensor4<T>& grad_out,
                        Tensor4<T>* grad_x, BatchNormGrads<T>* grads);

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x);

/// Subgradient 0 at exactly 0.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& grad_out);

/// 2x2 mean pooling, stride 2; odd trailing row/column is dropped.
template <typename T>
Tensor4<T> avgpool2_forward(const Tensor4<T>& x);

template <typename T>
Tensor4<T> avgpool2_backward(int in_h, int in_w, const Tensor4<T>& grad_out);

/// out = x + BN2(conv2(ReLU(BN1(conv1(x))))), all convs 3x3 keeping the
/// channel width.
template <typename T>
struct ResidualBlockParams {
    ConvParams<T> conv1, conv2;
    BatchNormParams<T> bn1, bn2;

    static ResidualBlockParams zeros(int channels) {
        ResidualBlockParams p;
        p.conv1 = ConvParams<T>::zeros(channels, channels, 3);
        p.conv2 = ConvParams<T>::zeros(channels, channels, 3);
        p.bn1 = BatchNormParams<T>::identity(channels);
        p.bn2 = BatchNormParams<T>::identity(channels);
        return p;
    }
};

template <typename T>
struct ResidualBlockGrads {
    ConvGrads<T> conv1, conv2;
    BatchNormGrads<T> bn1, bn2;
};

template <typename T>
struct ResidualBlockCache {
    Tensor4<T> x, h1, b1, r1, h2;
    BatchNormCache<T> c1, c2;
};

template <typename T>
Tensor4<T> residual_block_forward(const Tensor4<T>& x,
                                  const ResidualBlockParams<T>& p, Mode mode,
                                  ResidualBlockCache<T>* cache);

template <typename T>
void residual_block_backward(const ResidualBlockParams<T>& p,
                             const ResidualBlockCache<T>& cache,
                             const Tensor4<T>& grad_out, Tensor4<T>* grad_x,
                             ResidualBlockGrads<T>* grads);

}  // namespace wdrt
