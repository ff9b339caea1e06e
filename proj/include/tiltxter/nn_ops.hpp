#pragma once

// Forward and backward kernels for the layers used by the tilt classifier.
// All tensors are NCHW (conv/batchnorm) or NF (linear), 64-bit.

#include <cstddef>
#include <span>
#include <vector>

#include "tiltxter/tensor.hpp"

namespace tiltxter::nn {

enum class Mode { Train, Eval };

struct Conv2dGeometry {
    std::size_t stride = 1;
    std::size_t pad = 1;
};

/// Cross-correlation. x: [N,C,H,W], w: [O,C,KH,KW], b: [O].
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dGeometry g = {});

struct Conv2dGrads {
    Tensor dx;  // empty when not requested
    Tensor dw;
    Tensor db;
};

Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Conv2dGeometry g = {},
                            bool need_dx = true);

/// Per-channel state for batch normalization.
struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    explicit BatchNormState(std::size_t channels = 0)
        : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

/// Values kept from the forward pass for the backward pass.
struct BatchNormCache {
    Tensor x_hat;
    std::vector<double> inv_std;
    Mode mode = Mode::Train;
};

struct BatchNormResult {
    Tensor y;
    BatchNormCache cache;
};

/// Train mode normalizes with biased batch statistics and updates the
/// running mean/var (unbiased variance) with `state.momentum`. Eval mode uses
/// the running statistics. Train mode needs N*H*W >= 2 and N >= 2.
BatchNormResult batchnorm_forward(const Tensor& x, std::span<const double> gamma, std::span<const double> beta,
                                  BatchNormState& state, Mode mode);

struct BatchNormGrads {
    Tensor dx;
    std::vector<double> dgamma;
    std::vector<double> dbeta;
};

BatchNormGrads batchnorm_backward(const BatchNormCache& cache, std::span<const double> gamma, const Tensor& dy);

/// y = x W^T + b. x: [N,in], w: [out,in], b: [out].
Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b);

struct LinearGrads {
    Tensor dx;
    Tensor dw;
    Tensor db;
};

LinearGrads linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy, bool need_dx = true);

Tensor relu_forward(const Tensor& x);
/// Gradient passes where the forward input was > 0.
Tensor relu_backward(const Tensor& x, const Tensor& dy);

struct CrossEntropyResult {
    double loss = 0.0;             // mean over the batch
    Tensor dlogits;                // d(mean loss)/d logits
    std::vector<double> per_sample;
};

/// -log softmax(logits)[label] via max-shifted log-sum-exp. logits: [N,K].
CrossEntropyResult cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Softmax of one logit row.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace tiltxter::nn
