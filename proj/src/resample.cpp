#include "tiltxter/resample.hpp"

#include <cmath>

namespace tiltxter::resample {

double kernel_weight(double t, double a) {
    const double x = std::fabs(t);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

double CubicKernel::operator()(double t) const { return kernel_weight(t, a); }

DownsizedFrame bicubic_downsize_unclamped(const ForceGrid& frame, CubicKernel kernel) {
    return bicubic_resize<5, 4>(frame, kernel);
}

DownsizedFrame bicubic_downsize(const ForceGrid& frame, CubicKernel kernel) {
    auto out = bicubic_downsize_unclamped(frame, kernel);
    for (auto& v : out.cells) v = std::clamp(v, 0.0, kMaxForceN);
    return out;
}

std::pair<DownsizedFrame, DownsizedFrame> downsize_pair(const BiFrame& frame) {
    return {bicubic_downsize(frame.left.forces), bicubic_downsize(frame.right.forces)};
}

}  // namespace tiltxter::resample
