#include "tiltxter/tensor.hpp"

#include <cmath>

namespace tiltxter::nn {

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor Tensor::reshaped(Shape s) const& {
    Tensor t = *this;
    return std::move(t).reshaped(std::move(s));
}

Tensor Tensor::reshaped(Shape s) && {
    if (numel_of(s) != data.size())
        throw ContractViolation("cannot reshape " + shape_str(shape) + " to " + shape_str(s));
    shape = std::move(s);
    return std::move(*this);
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace tiltxter::nn
