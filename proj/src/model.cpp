#include "tiltxter/model.hpp"

#include <cmath>
#include <random>

namespace tiltxter::nn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

ModelSpec ModelSpec::tilt_default() {
    ModelSpec s;
    s.layers = {
        ConvSpec{2, 8},  BatchNormSpec{8},        ReluSpec{}, ConvSpec{8, 16},        BatchNormSpec{16},
        ReluSpec{},      FlattenSpec{},           LinearSpec{1600, 256}, ReluSpec{}, LinearSpec{256, 128},
        ReluSpec{},      LinearSpec{128, 64},     ReluSpec{}, LinearSpec{64, 9},
    };
    return s;
}

std::size_t ModelSpec::validate() const {
    std::size_t c = in_channels, h = in_height, w = in_width;
    bool flat = false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string where = "model spec layer " + std::to_string(i);
        std::visit(overloaded{
                       [&](const ConvSpec& s) {
                           if (flat) throw ContractViolation(where + ": conv after flatten");
                           if (s.in != c) throw ContractViolation(where + ": conv input channel mismatch");
                           if (s.stride == 0 || s.kernel == 0) throw ContractViolation(where + ": bad conv");
                           if (h + 2 * s.pad < s.kernel || w + 2 * s.pad < s.kernel)
                               throw ContractViolation(where + ": kernel larger than input");
                           h = (h + 2 * s.pad - s.kernel) / s.stride + 1;
                           w = (w + 2 * s.pad - s.kernel) / s.stride + 1;
                           c = s.out;
                       },
                       [&](const BatchNormSpec& s) {
                           if (s.channels != c) throw ContractViolation(where + ": batchnorm channel mismatch");
                       },
                       [&](const ReluSpec&) {},
                       [&](const FlattenSpec&) {
                           c = c * h * w;
                           h = w = 1;
                           flat = true;
                       },
                       [&](const LinearSpec& s) {
                           if (!flat) throw ContractViolation(where + ": linear before flatten");
                           if (s.in != c) throw ContractViolation(where + ": linear input mismatch");
                           c = s.out;
                       },
                   },
                   layers[i]);
    }
    if (!flat) throw ContractViolation("model spec has no flatten layer");
    return c;
}

std::size_t ModelSpec::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        if (auto* c = std::get_if<ConvSpec>(&l)) n += std::size_t{c->out} * c->in * c->kernel * c->kernel + c->out;
        if (auto* b = std::get_if<BatchNormSpec>(&l)) n += 2 * std::size_t{b->channels};
        if (auto* f = std::get_if<LinearSpec>(&l)) n += std::size_t{f->out} * f->in + f->out;
    }
    return n;
}

std::size_t ModelSpec::conv_layers() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += std::holds_alternative<ConvSpec>(l);
    return n;
}

std::size_t ModelSpec::linear_layers() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += std::holds_alternative<LinearSpec>(l);
    return n;
}

Model::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    std::mt19937_64 rng(seed);
    auto init_uniform = [&](Tensor& t, std::size_t fan_in) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto& v : t.data) v = u(rng);
    };
    for (const auto& ls : spec_.layers) {
        std::visit(overloaded{
                       [&](const ConvSpec& s) {
                           Conv c{s, Tensor({s.out, s.in, s.kernel, s.kernel}), Tensor({s.out}), {}, {}, {}};
                           init_uniform(c.w, std::size_t{s.in} * s.kernel * s.kernel);
                           c.dw = Tensor(c.w.shape);
                           c.db = Tensor(c.b.shape);
                           layers_.emplace_back(std::move(c));
                       },
                       [&](const BatchNormSpec& s) {
                           BatchNorm b{s,
                                       std::vector<double>(s.channels, 1.0),
                                       std::vector<double>(s.channels, 0.0),
                                       std::vector<double>(s.channels, 0.0),
                                       std::vector<double>(s.channels, 0.0),
                                       BatchNormState(s.channels),
                                       {}};
                           layers_.emplace_back(std::move(b));
                       },
                       [&](const ReluSpec&) { layers_.emplace_back(Relu{}); },
                       [&](const FlattenSpec&) { layers_.emplace_back(Flatten{}); },
                       [&](const LinearSpec& s) {
                           Linear l{s, Tensor({s.out, s.in}), Tensor({s.out}), {}, {}, {}};
                           init_uniform(l.w, s.in);
                           l.dw = Tensor(l.w.shape);
                           l.db = Tensor(l.b.shape);
                           layers_.emplace_back(std::move(l));
                       },
                   },
                   ls);
    }
}

Tensor Model::forward(const Tensor& x, Mode mode) {
    expect_rank(x, 4, "model input");
    if (x.dim(1) != spec_.in_channels || x.dim(2) != spec_.in_height || x.dim(3) != spec_.in_width)
        throw ContractViolation("model input: expected [N," + std::to_string(spec_.in_channels) + "," +
                                std::to_string(spec_.in_height) + "," + std::to_string(spec_.in_width) +
                                "], got " + shape_str(x.shape));
    Tensor h = x;
    for (auto& layer : layers_) {
        h = std::visit(overloaded{
                           [&](Conv& c) {
                               c.input = std::move(h);
                               return conv2d_forward(c.input, c.w, c.b, {c.spec.stride, c.spec.pad});
                           },
                           [&](BatchNorm& b) {
                               auto r = batchnorm_forward(h, b.gamma, b.beta, b.state, mode);
                               b.cache = std::move(r.cache);
                               return std::move(r.y);
                           },
                           [&](Relu& r) {
                               r.input = std::move(h);
                               return relu_forward(r.input);
                           },
                           [&](Flatten& f) {
                               f.input_shape = h.shape;
                               const std::size_t n = h.dim(0);
                               const std::size_t feat = h.numel() / (n ? n : 1);
                               return std::move(h).reshaped({n, feat});
                           },
                           [&](Linear& l) {
                               l.input = std::move(h);
                               return linear_forward(l.input, l.w, l.b);
                           },
                       },
                       layer);
    }
    return h;
}

Tensor Model::backward(const Tensor& dlogits) {
    Tensor g = dlogits;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        g = std::visit(overloaded{
                           [&](Conv& c) {
                               auto r = conv2d_backward(c.input, c.w, g, {c.spec.stride, c.spec.pad}, true);
                               for (std::size_t k = 0; k < c.dw.numel(); ++k) c.dw.data[k] += r.dw.data[k];
                               for (std::size_t k = 0; k < c.db.numel(); ++k) c.db.data[k] += r.db.data[k];
                               return std::move(r.dx);
                           },
                           [&](BatchNorm& b) {
                               auto r = batchnorm_backward(b.cache, b.gamma, g);
                               for (std::size_t k = 0; k < b.gamma.size(); ++k) {
                                   b.dgamma[k] += r.dgamma[k];
                                   b.dbeta[k] += r.dbeta[k];
                               }
                               return std::move(r.dx);
                           },
                           [&](Relu& r) { return relu_backward(r.input, g); },
                           [&](Flatten& f) { return std::move(g).reshaped(f.input_shape); },
                           [&](Linear& l) {
                               auto r = linear_backward(l.input, l.w, g, true);
                               for (std::size_t k = 0; k < l.dw.numel(); ++k) l.dw.data[k] += r.dw.data[k];
                               for (std::size_t k = 0; k < l.db.numel(); ++k) l.db.data[k] += r.db.data[k];
                               return std::move(r.dx);
                           },
                       },
                       layers_[i]);
    }
    return g;
}

void Model::zero_grad() {
    for (auto& p : params()) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

std::vector<ParamRef> Model::params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const std::string prefix = "layer" + std::to_string(i) + ".";
        std::visit(overloaded{
                       [&](Conv& c) {
                           out.push_back({prefix + "weight", c.w.data, c.dw.data});
                           out.push_back({prefix + "bias", c.b.data, c.db.data});
                       },
                       [&](BatchNorm& b) {
                           out.push_back({prefix + "gamma", b.gamma, b.dgamma});
                           out.push_back({prefix + "beta", b.beta, b.dbeta});
                       },
                       [&](Linear& l) {
                           out.push_back({prefix + "weight", l.w.data, l.dw.data});
                           out.push_back({prefix + "bias", l.b.data, l.db.data});
                       },
                       [](auto&) {},
                   },
                   layers_[i]);
    }
    return out;
}

std::vector<double> Model::flat_state() const {
    std::vector<double> out;
    out.reserve(flat_state_size());
    auto put = [&](const auto& v) { out.insert(out.end(), v.begin(), v.end()); };
    for (const auto& layer : layers_) {
        std::visit(overloaded{
                       [&](const Conv& c) {
                           put(c.w.data);
                           put(c.b.data);
                       },
                       [&](const BatchNorm& b) {
                           put(b.gamma);
                           put(b.beta);
                           put(b.state.running_mean);
                           put(b.state.running_var);
                       },
                       [&](const Linear& l) {
                           put(l.w.data);
                           put(l.b.data);
                       },
                       [](const auto&) {},
                   },
                   layer);
    }
    return out;
}

std::size_t Model::flat_state_size() const {
    std::size_t n = spec_.param_count();
    for (const auto& l : spec_.layers)
        if (auto* b = std::get_if<BatchNormSpec>(&l)) n += 2 * std::size_t{b->channels};
    return n;
}

void Model::load_flat_state(std::span<const double> values) {
    if (values.size() != flat_state_size())
        throw ContractViolation("model state has " + std::to_string(values.size()) + " values, expected " +
                                std::to_string(flat_state_size()));
    std::size_t at = 0;
    auto take = [&](auto& v) {
        std::copy(values.begin() + static_cast<std::ptrdiff_t>(at),
                  values.begin() + static_cast<std::ptrdiff_t>(at + v.size()), v.begin());
        at += v.size();
    };
    for (auto& layer : layers_) {
        std::visit(overloaded{
                       [&](Conv& c) {
                           take(c.w.data);
                           take(c.b.data);
                       },
                       [&](BatchNorm& b) {
                           take(b.gamma);
                           take(b.beta);
                           take(b.state.running_mean);
                           take(b.state.running_var);
                       },
                       [&](Linear& l) {
                           take(l.w.data);
                           take(l.b.data);
                       },
                       [](auto&) {},
                   },
                   layer);
    }
}

Tensor to_input(std::span<const BiFrame* const> frames) {
    Tensor x({frames.size(), 2, 10, 10});
    for (std::size_t n = 0; n < frames.size(); ++n) {
        double* p = x.ptr() + n * 200;
        for (std::size_t i = 0; i < 100; ++i) {
            p[i] = frames[n]->left.forces.cells[i] / kMaxForceN;
            p[100 + i] = frames[n]->right.forces.cells[i] / kMaxForceN;
        }
    }
    return x;
}

Tensor to_input(const BiFrame& frame) {
    const BiFrame* p = &frame;
    return to_input(std::span<const BiFrame* const>(&p, 1));
}

}  // namespace tiltxter::nn
