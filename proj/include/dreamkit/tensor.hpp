#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "dreamkit/errors.hpp"

namespace dreamkit {

// Row-major dense tensor of 64-bit floats. Values are expected to stay
// finite; ops that can produce NaN/Inf check and throw NumericalError.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != count(shape))
            throw ValidationError("tensor data length does not match shape");
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        std::size_t n = count(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }

    static Tensor full(std::vector<std::size_t> s, double v) {
        std::size_t n = count(s);
        return Tensor(std::move(s), std::vector<double>(n, v));
    }

    std::size_t size() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }
    bool empty() const { return data.empty(); }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool bit_equal(const Tensor& o) const {
        return shape == o.shape && data == o.data;
    }
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

inline void require_finite(const Tensor& t, const char* where) {
    if (!t.finite()) throw NumericalError(std::string("non-finite values in ") + where);
}

}  // namespace dreamkit
