#pragma once

#include <array>
#include <filesystem>
#include <span>

#include "wdrt/layers.hpp"

namespace wdrt {

/// Mixing coefficients of the global/local objective.
template <typename T>
struct LossWeights {
    T alpha = T(0.5);
    T beta = T(0.5);
    T gamma = T(0.2);
};

/// Mixing coefficients of the fine-tune objective.
template <typename T>
struct FineTuneLossWeights {
    T alpha_t = T(0.6);
    T beta_t = T(0.4);
};

/// Mean absolute error and its subgradient sign(pred-target)/N.
template <typename T>
std::pair<T, Tensor4<T>> l1_loss(const Tensor4<T>& pred, const Tensor4<T>& target);

/// Mean squared error and gradient 2(pred-target)/N.
template <typename T>
std::pair<T, Tensor4<T>> l2_loss(const Tensor4<T>& pred, const Tensor4<T>& target);

/// Mean local SSIM over Gaussian-weighted 11x11 windows (sigma 1.5),
/// constants k1=0.01, k2=0.03 at dynamic range L.
double ssim(const LuminanceImage& x, const LuminanceImage& y, int window = 11,
            double k1 = 0.01, double k2 = 0.03, double L = 1.0);

/// 1 - ssim, with the analytic gradient with respect to x.
std::pair<double, LuminanceImage> dssim(const LuminanceImage& x,
                                        const LuminanceImage& y);

/// Five frozen convolution stages with ReLU taps, widths 64,64,128,128,256,
/// 2x mean pooling after the second and fourth stage. Weights come from a
/// seeded truncated normal or a tensor-container file and never train.
template <typename T>
struct FeatureExtractor {
    std::array<ConvParams<T>, 5> convs;

    static constexpr std::array<int, 5> kWidths{64, 64, 128, 128, 256};
    static constexpr uint64_t kDefaultSeed = 0x5eedfeedULL;

    static FeatureExtractor seeded(uint64_t seed = kDefaultSeed);
    static FeatureExtractor from_file(const std::filesystem::path& path);
};

/// Sum over the five stages of size-normalized L1 distance between the
/// extractor activations of pred and target. Inputs are single-channel and
/// get replicated to the extractor's three input channels. The gradient is
/// with respect to pred.
template <typename T>
std::pair<T, Tensor4<T>> feature_loss(const Tensor4<T>& pred,
                                      const Tensor4<T>& target,
                                      const FeatureExtractor<T>& fx);

/// Per-stage loss terms, same summation as feature_loss.
template <typename T>
std::array<T, 5> feature_loss_stages(const Tensor4<T>& pred,
                                     const Tensor4<T>& target,
                                     const FeatureExtractor<T>& fx);

/// Sum of squares over convolution kernel blocks (biases and batch-norm
/// parameters are the caller's responsibility to exclude). Gradient per
/// block is 2*theta, written to grads when non-null.
template <typename T>
T weight_reg(const std::vector<std::span<const T>>& kernel_blocks,
             std::vector<std::vector<T>>* grads = nullptr);

template <typename T>
struct CompositeParts {
    T total = T(0);
    T pixel = T(0);    // l1 (global/local) or l2 (fine tune)
    T feature = T(0);
    T reg = T(0);
    Tensor4<T> grad_pred;  // excludes the regularizer, which is not a
                           // function of the prediction
};

/// alpha*l1 + beta*feat + gamma*R(theta).
template <typename T>
CompositeParts<T> composite_global(const Tensor4<T>& pred, const Tensor4<T>& target,
                                   const std::vector<std::span<const T>>& theta_kernels,
                                   const LossWeights<T>& w,
                                   const FeatureExtractor<T>& fx);

/// Identical form with the local network's parameters.
template <typename T>
CompositeParts<T> composite_local(const Tensor4<T>& pred, const Tensor4<T>& target,
                                  const std::vector<std::span<const T>>& theta_kernels,
                                  const LossWeights<T>& w,
                                  const FeatureExtractor<T>& fx);

/// alpha_t*l2 + beta_t*feat.
template <typename T>
CompositeParts<T> composite_finetune(const Tensor4<T>& pred, const Tensor4<T>& target,
                                     const FineTuneLossWeights<T>& w,
                                     const FeatureExtractor<T>& fx);

}  // namespace wdrt
