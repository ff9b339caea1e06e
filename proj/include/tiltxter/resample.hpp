#pragma once

#include <utility>

#include "tiltxter/core.hpp"

namespace tiltxter::resample {

/// Two-piece cubic convolution kernel (Keys). a = -0.5 is Catmull-Rom.
struct CubicKernel {
    double a = -0.5;

    double operator()(double t) const;
};

double kernel_weight(double t, double a = -0.5);

/// Bicubic resampling of an arbitrary grid with pixel-center alignment and
/// clamp-to-edge. No output clamping.
template <std::size_t OR, std::size_t OC, std::size_t IR, std::size_t IC>
Grid<double, OR, OC> bicubic_resize(const Grid<double, IR, IC>& src, CubicKernel kernel = {});

/// 10x10 -> 5x4, clamped to [0, 9] N.
DownsizedFrame bicubic_downsize(const ForceGrid& frame, CubicKernel kernel = {});

/// Same as bicubic_downsize but without the final clamp (linearity holds).
DownsizedFrame bicubic_downsize_unclamped(const ForceGrid& frame, CubicKernel kernel = {});

std::pair<DownsizedFrame, DownsizedFrame> downsize_pair(const BiFrame& frame);

}  // namespace tiltxter::resample

#include "tiltxter/resample_impl.hpp"
