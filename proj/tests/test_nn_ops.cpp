#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "tiltxter/nn_ops.hpp"

using namespace tiltxter;
using namespace tiltxter::nn;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng, double scale = 1.0) {
    Tensor t(std::move(s));
    std::normal_distribution<double> n(0.0, scale);
    for (auto& v : t.data) v = n(rng);
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a.data[i] * b.data[i];
    return s;
}

// Central difference of f with respect to every entry of `v`.
template <typename F>
std::vector<double> numeric_grad(std::vector<double>& v, F&& f, double h = 1e-5) {
    std::vector<double> g(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double keep = v[i];
        v[i] = keep + h;
        const double up = f();
        v[i] = keep - h;
        const double down = f();
        v[i] = keep;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

// Relative error per entry, with a floor so entries that are zero up to
// rounding do not dominate.
double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::fabs(a[i]), std::fabs(b[i]), 1e-3});
        m = std::max(m, std::fabs(a[i] - b[i]) / scale);
    }
    return m;
}

}  // namespace

TEST(Conv2d, IdentityKernel) {
    std::mt19937_64 rng(1);
    const auto x = random_tensor({2, 1, 5, 6}, rng);
    Tensor w({1, 1, 3, 3});
    w.data[4] = 1.0;
    const auto y = conv2d_forward(x, w, Tensor({1}));
    EXPECT_EQ(y.shape, x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(y.data[i], x.data[i]);
}

TEST(Conv2d, ZeroWeightsGiveBias) {
    std::mt19937_64 rng(2);
    const auto x = random_tensor({1, 2, 10, 10}, rng);
    Tensor b({3}, std::vector<double>{0.5, -1.0, 2.0});
    const auto y = conv2d_forward(x, Tensor({3, 2, 3, 3}), b);
    ASSERT_EQ(y.shape, (Shape{1, 3, 10, 10}));
    for (std::size_t o = 0; o < 3; ++o)
        for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(y.data[o * 100 + i], b.data[o]);
}

TEST(Conv2d, MatchesDirectSum) {
    std::mt19937_64 rng(3);
    const auto x = random_tensor({2, 3, 6, 5}, rng);
    const auto w = random_tensor({4, 3, 3, 3}, rng);
    const auto b = random_tensor({4}, rng);
    for (std::size_t stride : {1u, 2u}) {
        const Conv2dGeometry g{stride, 1};
        const auto y = conv2d_forward(x, w, b, g);
        const std::size_t oh = (6 + 2 - 3) / stride + 1, ow = (5 + 2 - 3) / stride + 1;
        ASSERT_EQ(y.shape, (Shape{2, 4, oh, ow}));
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t o = 0; o < 4; ++o)
                for (std::size_t i = 0; i < oh; ++i)
                    for (std::size_t j = 0; j < ow; ++j) {
                        double acc = b.data[o];
                        for (std::size_t c = 0; c < 3; ++c)
                            for (int ky = 0; ky < 3; ++ky)
                                for (int kx = 0; kx < 3; ++kx) {
                                    const int yy = int(i * stride) + ky - 1, xx = int(j * stride) + kx - 1;
                                    if (yy < 0 || yy >= 6 || xx < 0 || xx >= 5) continue;
                                    acc += x.data[((n * 3 + c) * 6 + std::size_t(yy)) * 5 + std::size_t(xx)] *
                                           w.data[((o * 3 + c) * 3 + std::size_t(ky)) * 3 + std::size_t(kx)];
                                }
                        EXPECT_NEAR(y.data[((n * 4 + o) * oh + i) * ow + j], acc, 1e-12);
                    }
    }
}

TEST(Conv2d, GradientCheck) {
    std::mt19937_64 rng(4);
    auto x = random_tensor({1, 2, 4, 4}, rng);
    auto w = random_tensor({3, 2, 3, 3}, rng);
    auto b = random_tensor({3}, rng);
    const auto r = random_tensor({1, 3, 4, 4}, rng);
    auto loss = [&] { return dot(conv2d_forward(x, w, b), r); };
    const auto grads = conv2d_backward(x, w, r);
    EXPECT_LT(max_rel(grads.dx.data, numeric_grad(x.data, loss)), 1e-6);
    EXPECT_LT(max_rel(grads.dw.data, numeric_grad(w.data, loss)), 1e-6);
    EXPECT_LT(max_rel(grads.db.data, numeric_grad(b.data, loss)), 1e-6);
}

TEST(Conv2d, ShapeMismatchIsContractViolation) {
    EXPECT_THROW(conv2d_forward(Tensor({1, 2, 4, 4}), Tensor({3, 1, 3, 3}), Tensor({3})), ContractViolation);
    EXPECT_THROW(conv2d_forward(Tensor({1, 2, 4, 4}), Tensor({3, 2, 3, 3}), Tensor({2})), ContractViolation);
    EXPECT_THROW(conv2d_forward(Tensor({2, 4, 4}), Tensor({3, 2, 3, 3}), Tensor({3})), ContractViolation);
}

TEST(BatchNorm, TrainOutputIsNormalized) {
    std::mt19937_64 rng(5);
    const auto x = random_tensor({6, 3, 4, 4}, rng, 3.0);
    const std::vector<double> gamma(3, 1.0), beta(3, 0.0);
    BatchNormState st(3);
    const auto r = batchnorm_forward(x, gamma, beta, st, Mode::Train);
    for (std::size_t c = 0; c < 3; ++c) {
        double m = 0, v = 0;
        const std::size_t count = 6 * 16;
        for (std::size_t n = 0; n < 6; ++n)
            for (std::size_t i = 0; i < 16; ++i) m += r.y.data[(n * 3 + c) * 16 + i];
        m /= count;
        for (std::size_t n = 0; n < 6; ++n)
            for (std::size_t i = 0; i < 16; ++i) v += std::pow(r.y.data[(n * 3 + c) * 16 + i] - m, 2);
        v /= count;
        EXPECT_NEAR(m, 0.0, 1e-6);
        // eps keeps the variance a hair under one
        EXPECT_NEAR(v, 1.0, 1e-4);
    }
}

TEST(BatchNorm, RunningStatsUpdate) {
    std::mt19937_64 rng(6);
    const auto x = random_tensor({4, 2}, rng);
    const std::vector<double> gamma(2, 1.0), beta(2, 0.0);
    BatchNormState st(2);
    batchnorm_forward(x, gamma, beta, st, Mode::Train);
    for (std::size_t c = 0; c < 2; ++c) {
        double m = 0, v = 0;
        for (std::size_t n = 0; n < 4; ++n) m += x.data[n * 2 + c];
        m /= 4;
        for (std::size_t n = 0; n < 4; ++n) v += std::pow(x.data[n * 2 + c] - m, 2);
        v /= 3;  // unbiased
        EXPECT_NEAR(st.running_mean[c], 0.1 * m, 1e-15);
        EXPECT_NEAR(st.running_var[c], 0.9 + 0.1 * v, 1e-15);
    }
}

TEST(BatchNorm, EvalWithUnitStatsIsIdentity) {
    std::mt19937_64 rng(7);
    const auto x = random_tensor({3, 2, 2, 2}, rng);
    const std::vector<double> gamma(2, 1.0), beta(2, 0.0);
    BatchNormState st(2);
    st.eps = 0.0;
    const auto r = batchnorm_forward(x, gamma, beta, st, Mode::Eval);
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(r.y.data[i], x.data[i]);
}

TEST(BatchNorm, TrainModeRejectsSingleSample) {
    BatchNormState st(2);
    const std::vector<double> gamma(2, 1.0), beta(2, 0.0);
    EXPECT_THROW(batchnorm_forward(Tensor({1, 2, 3, 3}), gamma, beta, st, Mode::Train), ContractViolation);
    EXPECT_NO_THROW(batchnorm_forward(Tensor({1, 2, 3, 3}), gamma, beta, st, Mode::Eval));
}

TEST(BatchNorm, GradientCheck) {
    std::mt19937_64 rng(8);
    for (const Shape& shape : {Shape{4, 3, 3, 3}, Shape{5, 4}}) {
        const std::size_t ch = shape[1];
        auto x = random_tensor(shape, rng, 2.0);
        auto gamma = random_tensor({ch}, rng).data;
        auto beta = random_tensor({ch}, rng).data;
        const auto r = random_tensor(shape, rng);
        auto loss = [&] {
            BatchNormState st(ch);
            return dot(batchnorm_forward(x, gamma, beta, st, Mode::Train).y, r);
        };
        BatchNormState st(ch);
        const auto fwd = batchnorm_forward(x, gamma, beta, st, Mode::Train);
        const auto g = batchnorm_backward(fwd.cache, gamma, r);
        EXPECT_LT(max_rel(g.dx.data, numeric_grad(x.data, loss)), 1e-5);
        EXPECT_LT(max_rel(g.dgamma, numeric_grad(gamma, loss)), 1e-5);
        EXPECT_LT(max_rel(g.dbeta, numeric_grad(beta, loss)), 1e-5);
    }
}

TEST(Linear, IdentityWeights) {
    std::mt19937_64 rng(9);
    const auto x = random_tensor({7, 5}, rng);
    Tensor w({5, 5});
    for (std::size_t i = 0; i < 5; ++i) w.data[i * 5 + i] = 1.0;
    const auto y = linear_forward(x, w, Tensor({5}));
    EXPECT_EQ(y, x);
}

TEST(Linear, MatchesDirectSumForOddBatches) {
    std::mt19937_64 rng(10);
    for (std::size_t n : {1u, 3u, 5u, 8u}) {
        const auto x = random_tensor({n, 7}, rng);
        const auto w = random_tensor({4, 7}, rng);
        const auto b = random_tensor({4}, rng);
        const auto y = linear_forward(x, w, b);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t o = 0; o < 4; ++o) {
                double acc = b.data[o];
                for (std::size_t k = 0; k < 7; ++k) acc += x.data[i * 7 + k] * w.data[o * 7 + k];
                EXPECT_NEAR(y.data[i * 4 + o], acc, 1e-12);
            }
    }
}

TEST(Linear, GradientCheck) {
    std::mt19937_64 rng(11);
    auto x = random_tensor({3, 6}, rng);
    auto w = random_tensor({4, 6}, rng);
    auto b = random_tensor({4}, rng);
    const auto r = random_tensor({3, 4}, rng);
    auto loss = [&] { return dot(linear_forward(x, w, b), r); };
    const auto g = linear_backward(x, w, r);
    EXPECT_LT(max_rel(g.dx.data, numeric_grad(x.data, loss)), 1e-6);
    EXPECT_LT(max_rel(g.dw.data, numeric_grad(w.data, loss)), 1e-6);
    EXPECT_LT(max_rel(g.db.data, numeric_grad(b.data, loss)), 1e-6);
}

TEST(Relu, ForwardBackward) {
    const Tensor x({3}, std::vector<double>{-1.0, 0.0, 2.0});
    EXPECT_EQ(relu_forward(x).data, (std::vector<double>{0.0, 0.0, 2.0}));
    const Tensor dy({3}, std::vector<double>{5.0, 6.0, 7.0});
    EXPECT_EQ(relu_backward(x, dy).data, (std::vector<double>{0.0, 0.0, 7.0}));
}

TEST(CrossEntropy, UniformLogits) {
    const std::vector<int> labels{3};
    const auto r = cross_entropy(Tensor({1, 9}), labels);
    EXPECT_NEAR(r.loss, std::log(9.0), 1e-12);
    EXPECT_NEAR(r.loss, 2.19722, 1e-5);
}

TEST(CrossEntropy, LargeLogitIsStable) {
    Tensor logits({1, 9});
    logits.data[2] = 1000.0;
    const std::vector<int> labels{2};
    const auto r = cross_entropy(logits, labels);
    EXPECT_TRUE(std::isfinite(r.loss));
    EXPECT_NEAR(r.loss, 0.0, 1e-12);
    EXPECT_TRUE(r.dlogits.all_finite());
}

TEST(CrossEntropy, GradientRowsSumToZeroAndMatchFiniteDifferences) {
    std::mt19937_64 rng(12);
    auto logits = random_tensor({4, 9}, rng, 3.0);
    const std::vector<int> labels{0, 8, 4, 4};
    const auto r = cross_entropy(logits, labels);
    for (std::size_t n = 0; n < 4; ++n) {
        double s = 0.0;
        for (std::size_t k = 0; k < 9; ++k) s += r.dlogits.data[n * 9 + k];
        EXPECT_NEAR(s, 0.0, 1e-12);
    }
    EXPECT_GE(r.loss, 0.0);
    auto loss = [&] { return cross_entropy(logits, labels).loss; };
    EXPECT_LT(max_rel(r.dlogits.data, numeric_grad(logits.data, loss)), 1e-6);
}

TEST(CrossEntropy, RejectsBadLabels) {
    const std::vector<int> labels{9};
    EXPECT_THROW(cross_entropy(Tensor({1, 9}), labels), ContractViolation);
}

TEST(Softmax, SumsToOne) {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 100; ++t) {
        const auto l = random_tensor({9}, rng, 20.0);
        const auto p = softmax(l.data);
        double s = 0.0;
        for (double v : p) {
            EXPECT_GE(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}
