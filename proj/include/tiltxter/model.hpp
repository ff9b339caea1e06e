#pragma once

// The tilt classifier: a layer list built from a ModelSpec, with cached
// activations for one backward pass.

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tiltxter/core.hpp"
#include "tiltxter/nn_ops.hpp"

namespace tiltxter::nn {

struct ConvSpec {
    std::uint32_t in = 0, out = 0, kernel = 3, stride = 1, pad = 1;
    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};
struct BatchNormSpec {
    std::uint32_t channels = 0;
    friend bool operator==(const BatchNormSpec&, const BatchNormSpec&) = default;
};
struct ReluSpec {
    friend bool operator==(const ReluSpec&, const ReluSpec&) = default;
};
struct FlattenSpec {
    friend bool operator==(const FlattenSpec&, const FlattenSpec&) = default;
};
struct LinearSpec {
    std::uint32_t in = 0, out = 0;
    friend bool operator==(const LinearSpec&, const LinearSpec&) = default;
};

using LayerSpec = std::variant<ConvSpec, BatchNormSpec, ReluSpec, FlattenSpec, LinearSpec>;

struct ModelSpec {
    std::uint32_t in_channels = 2, in_height = 10, in_width = 10;
    std::vector<LayerSpec> layers;

    /// conv(2->8) bn relu conv(8->16) bn relu flatten
    /// linear(1600->256) relu linear(256->128) relu linear(128->64) relu linear(64->9)
    static ModelSpec tilt_default();

    /// Checks that every layer's input matches the previous output; returns
    /// the output feature count.
    std::size_t validate() const;
    std::size_t param_count() const;
    std::size_t conv_layers() const;
    std::size_t linear_layers() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// View of one trainable tensor and its gradient accumulator.
struct ParamRef {
    std::string name;
    std::span<double> value;
    std::span<double> grad;
};

class Model {
public:
    Model() = default;
    /// Fan-in scaled uniform weights (He bound sqrt(6/fan_in)), zero biases,
    /// batchnorm gamma=1 beta=0.
    Model(ModelSpec spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }

    /// x: [N, C, H, W]. Caches activations for backward().
    Tensor forward(const Tensor& x, Mode mode);
    /// Backpropagates d loss / d logits through the last forward() call and
    /// accumulates parameter gradients. Returns d loss / d input.
    Tensor backward(const Tensor& dlogits);
    void zero_grad();

    std::vector<ParamRef> params();
    std::size_t param_count() const { return spec_.param_count(); }

    /// Every stored real, in checkpoint order: per layer its parameters then
    /// its running statistics.
    std::vector<double> flat_state() const;
    void load_flat_state(std::span<const double> values);
    std::size_t flat_state_size() const;

    friend bool operator==(const Model& a, const Model& b) {
        return a.spec_ == b.spec_ && a.flat_state() == b.flat_state();
    }

private:
    struct Conv {
        ConvSpec spec;
        Tensor w, b, dw, db;
        Tensor input;
    };
    struct BatchNorm {
        BatchNormSpec spec;
        std::vector<double> gamma, beta, dgamma, dbeta;
        BatchNormState state;
        BatchNormCache cache;
    };
    struct Relu {
        Tensor input;
    };
    struct Flatten {
        Shape input_shape;
    };
    struct Linear {
        LinearSpec spec;
        Tensor w, b, dw, db;
        Tensor input;
    };
    using Layer = std::variant<Conv, BatchNorm, Relu, Flatten, Linear>;

    ModelSpec spec_;
    std::vector<Layer> layers_;
};

/// Forces scaled to [0, 1]; channel 0 = left (mirrored), channel 1 = right.
Tensor to_input(std::span<const BiFrame* const> frames);
Tensor to_input(const BiFrame& frame);

}  // namespace tiltxter::nn
