#include "tiltxter/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tiltxter::nn {

namespace {

struct ConvDims {
    std::size_t n, c, h, w, o, kh, kw, oh, ow;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, Conv2dGeometry g) {
    expect_rank(x, 4, "conv2d input");
    expect_rank(w, 4, "conv2d weight");
    if (w.dim(1) != x.dim(1))
        throw ContractViolation("conv2d: weight expects " + std::to_string(w.dim(1)) + " input channels, got " +
                                std::to_string(x.dim(1)));
    if (g.stride == 0) throw ContractViolation("conv2d: stride must be >= 1");
    ConvDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), 0, 0};
    if (d.h + 2 * g.pad < d.kh || d.w + 2 * g.pad < d.kw)
        throw ContractViolation("conv2d: kernel larger than padded input");
    d.oh = (d.h + 2 * g.pad - d.kh) / g.stride + 1;
    d.ow = (d.w + 2 * g.pad - d.kw) / g.stride + 1;
    return d;
}

// Output index range [lo, hi) whose input index o*stride + k - pad lies in [0, n).
std::pair<std::size_t, std::size_t> valid_range(std::size_t k, std::size_t pad, std::size_t stride,
                                                std::size_t n_in, std::size_t n_out) {
    const long long kk = static_cast<long long>(k) - static_cast<long long>(pad);
    const long long s = static_cast<long long>(stride);
    long long lo = 0;
    if (kk < 0) lo = (-kk + s - 1) / s;
    long long hi = (static_cast<long long>(n_in) - 1 - kk);
    hi = hi < 0 ? 0 : hi / s + 1;
    hi = std::min<long long>(hi, static_cast<long long>(n_out));
    lo = std::min(lo, hi);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

std::size_t spatial(const Tensor& x) {
    std::size_t s = 1;
    for (std::size_t i = 2; i < x.rank(); ++i) s *= x.dim(i);
    return s;
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dGeometry g) {
    const auto d = conv_dims(x, w, g);
    expect_shape(b, {d.o}, "conv2d bias");
    Tensor y({d.n, d.o, d.oh, d.ow});

    const std::size_t in_plane = d.h * d.w;
    const std::size_t out_plane = d.oh * d.ow;
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t o = 0; o < d.o; ++o) {
            double* yp = y.ptr() + (n * d.o + o) * out_plane;
            std::fill(yp, yp + out_plane, b.data[o]);
            for (std::size_t c = 0; c < d.c; ++c) {
                const double* xp = x.ptr() + (n * d.c + c) * in_plane;
                const double* wp = w.ptr() + ((o * d.c + c) * d.kh) * d.kw;
                for (std::size_t ky = 0; ky < d.kh; ++ky) {
                    const auto [oy0, oy1] = valid_range(ky, g.pad, g.stride, d.h, d.oh);
                    for (std::size_t kx = 0; kx < d.kw; ++kx) {
                        const double wv = wp[ky * d.kw + kx];
                        const auto [ox0, ox1] = valid_range(kx, g.pad, g.stride, d.w, d.ow);
                        const std::size_t ix0 = ox0 * g.stride + kx - g.pad;
                        const std::size_t cnt = ox1 - ox0;
                        if (cnt == 0) continue;
                        for (std::size_t oy = oy0; oy < oy1; ++oy) {
                            const double* xr = xp + (oy * g.stride + ky - g.pad) * d.w + ix0;
                            double* yr = yp + oy * d.ow + ox0;
                            for (std::size_t t = 0; t < cnt; ++t) yr[t] += wv * xr[t * g.stride];
                        }
                    }
                }
            }
        }
    }
    return y;
}

Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Conv2dGeometry g, bool need_dx) {
    const auto d = conv_dims(x, w, g);
    expect_shape(dy, {d.n, d.o, d.oh, d.ow}, "conv2d upstream gradient");

    Conv2dGrads out{need_dx ? Tensor(x.shape) : Tensor{}, Tensor(w.shape), Tensor({d.o})};
    const std::size_t in_plane = d.h * d.w;
    const std::size_t out_plane = d.oh * d.ow;
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t o = 0; o < d.o; ++o) {
            const double* gp = dy.ptr() + (n * d.o + o) * out_plane;
            double bsum = 0.0;
            for (std::size_t i = 0; i < out_plane; ++i) bsum += gp[i];
            out.db.data[o] += bsum;

            for (std::size_t c = 0; c < d.c; ++c) {
                const double* xp = x.ptr() + (n * d.c + c) * in_plane;
                double* dxp = need_dx ? out.dx.ptr() + (n * d.c + c) * in_plane : nullptr;
                const double* wp = w.ptr() + ((o * d.c + c) * d.kh) * d.kw;
                double* dwp = out.dw.ptr() + ((o * d.c + c) * d.kh) * d.kw;
                for (std::size_t ky = 0; ky < d.kh; ++ky) {
                    const auto [oy0, oy1] = valid_range(ky, g.pad, g.stride, d.h, d.oh);
                    for (std::size_t kx = 0; kx < d.kw; ++kx) {
                        const auto [ox0, ox1] = valid_range(kx, g.pad, g.stride, d.w, d.ow);
                        const double wv = wp[ky * d.kw + kx];
                        double acc = 0.0;
                        const std::size_t ix0 = ox0 * g.stride + kx - g.pad;
                        const std::size_t cnt = ox1 - ox0;
                        if (cnt == 0) continue;
                        for (std::size_t oy = oy0; oy < oy1; ++oy) {
                            const std::size_t in_off = (oy * g.stride + ky - g.pad) * d.w + ix0;
                            const double* xr = xp + in_off;
                            const double* gr = gp + oy * d.ow + ox0;
                            for (std::size_t t = 0; t < cnt; ++t) acc += gr[t] * xr[t * g.stride];
                            if (dxp) {
                                double* dxr = dxp + in_off;
                                for (std::size_t t = 0; t < cnt; ++t) dxr[t * g.stride] += wv * gr[t];
                            }
                        }
                        dwp[ky * d.kw + kx] += acc;
                    }
                }
            }
        }
    }
    return out;
}

BatchNormResult batchnorm_forward(const Tensor& x, std::span<const double> gamma, std::span<const double> beta,
                                  BatchNormState& state, Mode mode) {
    if (x.rank() != 2 && x.rank() != 4)
        throw ContractViolation("batchnorm: expected [N,C] or [N,C,H,W], got " + shape_str(x.shape));
    const std::size_t n = x.dim(0), ch = x.dim(1), sp = spatial(x);
    if (gamma.size() != ch || beta.size() != ch || state.running_mean.size() != ch ||
        state.running_var.size() != ch)
        throw ContractViolation("batchnorm: parameter size does not match " + std::to_string(ch) + " channels");
    if (mode == Mode::Train && n < 2)
        throw ContractViolation("batchnorm: train mode needs a batch of at least 2 samples");

    const std::size_t m = n * sp;
    BatchNormResult res{Tensor(x.shape), BatchNormCache{Tensor(x.shape), std::vector<double>(ch), mode}};
    for (std::size_t c = 0; c < ch; ++c) {
        double mean, var;
        if (mode == Mode::Train) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* p = x.ptr() + (i * ch + c) * sp;
                for (std::size_t j = 0; j < sp; ++j) sum += p[j];
            }
            mean = sum / static_cast<double>(m);
            double sq = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* p = x.ptr() + (i * ch + c) * sp;
                for (std::size_t j = 0; j < sp; ++j) sq += (p[j] - mean) * (p[j] - mean);
            }
            var = sq / static_cast<double>(m);
            const double unbiased = sq / static_cast<double>(m - 1);
            state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mean;
            state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
        } else {
            mean = state.running_mean[c];
            var = state.running_var[c];
        }
        const double inv_std = 1.0 / std::sqrt(var + state.eps);
        res.cache.inv_std[c] = inv_std;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = (i * ch + c) * sp;
            const double* p = x.ptr() + off;
            double* xh = res.cache.x_hat.ptr() + off;
            double* yp = res.y.ptr() + off;
            for (std::size_t j = 0; j < sp; ++j) {
                xh[j] = (p[j] - mean) * inv_std;
                yp[j] = gamma[c] * xh[j] + beta[c];
            }
        }
    }
    return res;
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache, std::span<const double> gamma, const Tensor& dy) {
    expect_shape(dy, cache.x_hat.shape, "batchnorm upstream gradient");
    const std::size_t n = dy.dim(0), ch = dy.dim(1), sp = spatial(dy);
    const double m = static_cast<double>(n * sp);
    BatchNormGrads g{Tensor(dy.shape), std::vector<double>(ch, 0.0), std::vector<double>(ch, 0.0)};
    for (std::size_t c = 0; c < ch; ++c) {
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = (i * ch + c) * sp;
            const double* gp = dy.ptr() + off;
            const double* xh = cache.x_hat.ptr() + off;
            for (std::size_t j = 0; j < sp; ++j) {
                sum_dy += gp[j];
                sum_dy_xh += gp[j] * xh[j];
            }
        }
        g.dgamma[c] = sum_dy_xh;
        g.dbeta[c] = sum_dy;
        const double scale = gamma[c] * cache.inv_std[c];
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = (i * ch + c) * sp;
            const double* gp = dy.ptr() + off;
            const double* xh = cache.x_hat.ptr() + off;
            double* dx = g.dx.ptr() + off;
            if (cache.mode == Mode::Train) {
                for (std::size_t j = 0; j < sp; ++j)
                    dx[j] = scale / m * (m * gp[j] - sum_dy - xh[j] * sum_dy_xh);
            } else {
                for (std::size_t j = 0; j < sp; ++j) dx[j] = scale * gp[j];
            }
        }
    }
    return g;
}

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    expect_rank(x, 2, "linear input");
    expect_rank(w, 2, "linear weight");
    const std::size_t n = x.dim(0), in = x.dim(1), out = w.dim(0);
    if (w.dim(1) != in)
        throw ContractViolation("linear: weight expects " + std::to_string(w.dim(1)) + " inputs, got " +
                                std::to_string(in));
    expect_shape(b, {out}, "linear bias");

    Tensor y({n, out});
    // Four samples per pass with split accumulators; the summation order is
    // fixed, so results are reproducible.
    for (std::size_t o = 0; o < out; ++o) {
        const double* wr = w.ptr() + o * in;
        std::size_t s = 0;
        for (; s + 4 <= n; s += 4) {
            const double* x0 = x.ptr() + s * in;
            const double* x1 = x0 + in;
            const double* x2 = x1 + in;
            const double* x3 = x2 + in;
            double a0 = 0, a1 = 0, a2 = 0, a3 = 0, b0 = 0, b1 = 0, b2 = 0, b3 = 0;
            std::size_t i = 0;
            for (; i + 2 <= in; i += 2) {
                a0 += wr[i] * x0[i];
                a1 += wr[i] * x1[i];
                a2 += wr[i] * x2[i];
                a3 += wr[i] * x3[i];
                b0 += wr[i + 1] * x0[i + 1];
                b1 += wr[i + 1] * x1[i + 1];
                b2 += wr[i + 1] * x2[i + 1];
                b3 += wr[i + 1] * x3[i + 1];
            }
            if (i < in) {
                a0 += wr[i] * x0[i];
                a1 += wr[i] * x1[i];
                a2 += wr[i] * x2[i];
                a3 += wr[i] * x3[i];
            }
            y.data[(s + 0) * out + o] = b.data[o] + (a0 + b0);
            y.data[(s + 1) * out + o] = b.data[o] + (a1 + b1);
            y.data[(s + 2) * out + o] = b.data[o] + (a2 + b2);
            y.data[(s + 3) * out + o] = b.data[o] + (a3 + b3);
        }
        for (; s < n; ++s) {
            const double* xr = x.ptr() + s * in;
            double a = 0, c = 0;
            std::size_t i = 0;
            for (; i + 2 <= in; i += 2) {
                a += wr[i] * xr[i];
                c += wr[i + 1] * xr[i + 1];
            }
            if (i < in) a += wr[i] * xr[i];
            y.data[s * out + o] = b.data[o] + (a + c);
        }
    }
    return y;
}

LinearGrads linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy, bool need_dx) {
    expect_rank(x, 2, "linear input");
    const std::size_t n = x.dim(0), in = x.dim(1), out = w.dim(0);
    expect_shape(w, {out, in}, "linear weight");
    expect_shape(dy, {n, out}, "linear upstream gradient");

    LinearGrads g{need_dx ? Tensor({n, in}) : Tensor{}, Tensor({out, in}), Tensor({out})};
    for (std::size_t o = 0; o < out; ++o) {
        double* dwr = g.dw.ptr() + o * in;
        double bsum = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const double gv = dy.data[s * out + o];
            bsum += gv;
            if (gv == 0.0) continue;
            const double* xr = x.ptr() + s * in;
            for (std::size_t i = 0; i < in; ++i) dwr[i] += gv * xr[i];
        }
        g.db.data[o] = bsum;
    }
    if (need_dx) {
        for (std::size_t s = 0; s < n; ++s) {
            double* dxr = g.dx.ptr() + s * in;
            for (std::size_t o = 0; o < out; ++o) {
                const double gv = dy.data[s * out + o];
                if (gv == 0.0) continue;
                const double* wr = w.ptr() + o * in;
                for (std::size_t i = 0; i < in; ++i) dxr[i] += gv * wr[i];
            }
        }
    }
    return g;
}

Tensor relu_forward(const Tensor& x) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    expect_shape(dy, x.shape, "relu upstream gradient");
    Tensor dx(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) dx.data[i] = x.data[i] > 0.0 ? dy.data[i] : 0.0;
    return dx;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) return p;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) z += (p[k] = std::exp(logits[k] - mx));
    for (auto& v : p) v /= z;
    return p;
}

CrossEntropyResult cross_entropy(const Tensor& logits, std::span<const int> labels) {
    expect_rank(logits, 2, "cross_entropy logits");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    if (labels.size() != n)
        throw ContractViolation("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(n) + " rows");
    CrossEntropyResult r{0.0, Tensor({n, k}), std::vector<double>(n)};
    if (n == 0) return r;
    for (std::size_t s = 0; s < n; ++s) {
        const int label = labels[s];
        if (label < 0 || static_cast<std::size_t>(label) >= k)
            throw ContractViolation("cross_entropy: label " + std::to_string(label) + " out of range");
        const double* row = logits.ptr() + s * k;
        const double mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        r.per_sample[s] = lse - row[label];
        r.loss += r.per_sample[s];
        double* g = r.dlogits.ptr() + s * k;
        for (std::size_t j = 0; j < k; ++j) g[j] = std::exp(row[j] - lse) / static_cast<double>(n);
        g[label] -= 1.0 / static_cast<double>(n);
    }
    r.loss /= static_cast<double>(n);
    return r;
}

}  // namespace tiltxter::nn
