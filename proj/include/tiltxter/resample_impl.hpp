#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace tiltxter::resample {

namespace detail {

// Source index and the 4 tap weights for one output coordinate.
struct Taps {
    std::array<int, 4> index{};
    std::array<double, 4> weight{};
};

inline Taps taps_for(std::size_t out_i, std::size_t out_n, std::size_t in_n, const CubicKernel& k) {
    const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
    const double pos = (static_cast<double>(out_i) + 0.5) * scale - 0.5;
    const int base = static_cast<int>(std::floor(pos));
    Taps t;
    for (int m = 0; m < 4; ++m) {
        const int src = base - 1 + m;
        t.index[m] = std::clamp(src, 0, static_cast<int>(in_n) - 1);
        t.weight[m] = k(pos - src);
    }
    return t;
}

}  // namespace detail

template <std::size_t OR, std::size_t OC, std::size_t IR, std::size_t IC>
Grid<double, OR, OC> bicubic_resize(const Grid<double, IR, IC>& src, CubicKernel kernel) {
    std::array<detail::Taps, OR> row_taps;
    std::array<detail::Taps, OC> col_taps;
    for (std::size_t i = 0; i < OR; ++i) row_taps[i] = detail::taps_for(i, OR, IR, kernel);
    for (std::size_t j = 0; j < OC; ++j) col_taps[j] = detail::taps_for(j, OC, IC, kernel);

    Grid<double, OR, OC> out;
    for (std::size_t i = 0; i < OR; ++i) {
        const auto& ry = row_taps[i];
        for (std::size_t j = 0; j < OC; ++j) {
            const auto& cx = col_taps[j];
            double acc = 0.0;
            for (int m = 0; m < 4; ++m) {
                double row_acc = 0.0;
                for (int n = 0; n < 4; ++n)
                    row_acc += src(static_cast<std::size_t>(ry.index[m]),
                                   static_cast<std::size_t>(cx.index[n])) *
                               cx.weight[n];
                acc += row_acc * ry.weight[m];
            }
            out(i, j) = acc;
        }
    }
    return out;
}

}  // namespace tiltxter::resample
