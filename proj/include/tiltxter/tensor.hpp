#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tiltxter::nn {

/// Shape or argument mismatch between tensors. Indicates a caller bug.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

/// Dense row-major tensor of doubles.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0)
        : shape(std::move(s)), data(numel_of(shape), fill) {}
    Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
        if (data.size() != numel_of(shape))
            throw ContractViolation("tensor data size " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    }

    static std::size_t numel_of(const Shape& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t numel() const { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    std::size_t rank() const { return shape.size(); }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    /// Same data, new shape of identical element count.
    Tensor reshaped(Shape s) const&;
    Tensor reshaped(Shape s) &&;

    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline void expect_shape(const Tensor& t, const Shape& s, const char* what) {
    if (t.shape != s)
        throw ContractViolation(std::string(what) + ": expected shape " + shape_str(s) + ", got " +
                                shape_str(t.shape));
}

inline void expect_rank(const Tensor& t, std::size_t r, const char* what) {
    if (t.rank() != r)
        throw ContractViolation(std::string(what) + ": expected rank " + std::to_string(r) + ", got " +
                                shape_str(t.shape));
}

}  // namespace tiltxter::nn
