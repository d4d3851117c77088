#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace geomlab {

/// Dense double-precision vector; the ambient object of every geometry.
using Vec = std::vector<double>;

inline double dot(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("dot: dimension mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += x[i] * y[i];
    }
    return s;
}

inline double norm_sq(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) {
        s += v * v;
    }
    return s;
}

inline double norm(std::span<const double> x) { return std::sqrt(norm_sq(x)); }

inline bool all_finite(std::span<const double> x) {
    for (double v : x) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

inline Vec scaled(std::span<const double> x, double s) {
    Vec out(x.begin(), x.end());
    for (double& v : out) v *= s;
    return out;
}

// y += s * x
inline void axpy(double s, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("axpy: dimension mismatch");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += s * x[i];
    }
}

inline bool exact_equal(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] != y[i]) return false;
    }
    return true;
}

// squared distance between the unit directions of x and y; stable way to get
// 1 - cos(x, y) without cancellation when the angle is small
inline double unit_gap_sq(std::span<const double> x, double nx,
                          std::span<const double> y, double ny) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] / nx - y[i] / ny;
        s += d * d;
    }
    return s;
}

}  // namespace geomlab
