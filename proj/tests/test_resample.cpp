#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "tiltxter/resample.hpp"

using namespace tiltxter;
using resample::bicubic_downsize;
using resample::bicubic_downsize_unclamped;
using resample::kernel_weight;

namespace {

// Brute force: every integer tap in a wide band, weight from the textbook
// piecewise formula (zero outside |t| < 2), indices clamped to the edge.
double keys(double t, double a) {
    t = std::fabs(t);
    if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
    return 0.0;
}

DownsizedFrame oracle(const ForceGrid& src, bool clamp_output) {
    DownsizedFrame out;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 4; ++j) {
            const double y = (i + 0.5) * 10.0 / 5.0 - 0.5;
            const double x = (j + 0.5) * 10.0 / 4.0 - 0.5;
            double acc = 0.0;
            for (int m = -4; m <= 13; ++m) {
                const double wy = keys(y - m, -0.5);
                if (wy == 0.0) continue;
                for (int n = -4; n <= 13; ++n) {
                    const double wx = keys(x - n, -0.5);
                    if (wx == 0.0) continue;
                    const int r = std::clamp(m, 0, 9), c = std::clamp(n, 0, 9);
                    acc += src(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) * wy * wx;
                }
            }
            out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                clamp_output ? std::clamp(acc, 0.0, 9.0) : acc;
        }
    }
    return out;
}

double max_abs_diff(const DownsizedFrame& a, const DownsizedFrame& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.cells.size(); ++k) m = std::max(m, std::fabs(a.cells[k] - b.cells[k]));
    return m;
}

}  // namespace

TEST(Kernel, Examples) {
    EXPECT_DOUBLE_EQ(kernel_weight(0.0, -0.5), 1.0);
    EXPECT_DOUBLE_EQ(kernel_weight(1.0, -0.5), 0.0);
    EXPECT_NEAR(kernel_weight(0.5, -0.5), 0.5625, 1e-15);
    EXPECT_EQ(kernel_weight(2.0, -0.5), 0.0);
    EXPECT_EQ(kernel_weight(-3.5, -0.5), 0.0);
}

TEST(Kernel, PartitionOfUnity) {
    for (double a : {-0.5, -0.75, -1.0}) {
        for (double f = 0.0; f < 1.0; f += 0.0625) {
            double s = 0.0;
            for (int k = -2; k <= 2; ++k) s += kernel_weight(f - k, a);
            EXPECT_NEAR(s, 1.0, 1e-14) << "a=" << a << " f=" << f;
        }
    }
}

TEST(Kernel, EvenFunction) {
    for (double t = 0.0; t < 2.5; t += 0.1) EXPECT_EQ(kernel_weight(t), kernel_weight(-t));
}

TEST(Downsize, ConstantAndZero) {
    for (double v : {0.0, 3.0, 9.0}) {
        const auto out = bicubic_downsize(ForceGrid::filled(v));
        for (double o : out.cells) EXPECT_NEAR(o, v, 1e-12);
    }
}

TEST(Downsize, VerticalRampMatchesOracle) {
    ForceGrid ramp;
    for (std::size_t r = 0; r < 10; ++r)
        for (std::size_t c = 0; c < 10; ++c) ramp(r, c) = double(r);
    const auto out = bicubic_downsize(ramp);
    EXPECT_LE(max_abs_diff(out, oracle(ramp, true)), 1e-9);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 1; j < 4; ++j) EXPECT_NEAR(out(i, j), out(i, 0), 1e-12);
}

TEST(Downsize, RandomFramesMatchOracle) {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const auto g = testutil::random_grid(rng);
        worst = std::max(worst, max_abs_diff(bicubic_downsize(g), oracle(g, true)));
        worst = std::max(worst, max_abs_diff(bicubic_downsize_unclamped(g), oracle(g, false)));
    }
    EXPECT_LE(worst, 1e-9);
}

TEST(Downsize, LinearBeforeClamping) {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 20; ++k) {
        const auto a = testutil::random_grid(rng, -5, 5), b = testutil::random_grid(rng, -5, 5);
        const double alpha = 0.7, beta = -1.3;
        ForceGrid mix;
        for (std::size_t i = 0; i < 100; ++i) mix.cells[i] = alpha * a.cells[i] + beta * b.cells[i];
        const auto da = bicubic_downsize_unclamped(a), db = bicubic_downsize_unclamped(b);
        const auto dm = bicubic_downsize_unclamped(mix);
        for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(dm.cells[i], alpha * da.cells[i] + beta * db.cells[i], 1e-9);
    }
}

TEST(Downsize, MirrorSymmetry) {
    std::mt19937_64 rng(6);
    for (int k = 0; k < 20; ++k) {
        const auto g = testutil::random_grid(rng);
        const auto lhs = bicubic_downsize(mirror_columns(g));
        const auto rhs = mirror_columns(bicubic_downsize(g));
        EXPECT_LE(max_abs_diff(lhs, rhs), 1e-12);
    }
}

TEST(Downsize, OutputClampedToForceRange) {
    // A checkerboard overshoots under a negative-lobed kernel.
    ForceGrid g;
    for (std::size_t r = 0; r < 10; ++r)
        for (std::size_t c = 0; c < 10; ++c) g(r, c) = ((r + c) % 2) ? 9.0 : 0.0;
    for (double v : bicubic_downsize(g).cells) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 9.0);
    }
}

TEST(DownsizePair, IndependentPerFinger) {
    BiFrame f;
    f.right.forces = ForceGrid::filled(4.0);
    const auto [l, r] = resample::downsize_pair(f);
    for (double v : l.cells) EXPECT_EQ(v, 0.0);
    for (double v : r.cells) EXPECT_NEAR(v, 4.0, 1e-12);
}

TEST(DownsizePair, SwapAndComposition) {
    std::mt19937_64 rng(8);
    const auto f = testutil::random_biframe(rng);
    const auto [l, r] = resample::downsize_pair(f);
    EXPECT_EQ(l, bicubic_downsize(f.left.forces));
    EXPECT_EQ(r, bicubic_downsize(f.right.forces));
    BiFrame swapped = f;
    swapped.left.forces = f.right.forces;
    swapped.right.forces = f.left.forces;
    const auto [l2, r2] = resample::downsize_pair(swapped);
    EXPECT_EQ(l2, r);
    EXPECT_EQ(r2, l);
}
