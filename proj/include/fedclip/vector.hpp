#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "fedclip/errors.hpp"

namespace fedclip {

/// Dense model state x in R^d.
///
/// Plain value type: arithmetic returns new vectors and never mutates its
/// inputs, so instances can be shared read-only across threads.
class ParameterVector {
public:
    ParameterVector() = default;

    explicit ParameterVector(std::size_t dim, double fill = 0.0) : coords_(dim, fill) {
        if (dim == 0) throw ConfigError("ParameterVector: dimension must be >= 1");
    }

    ParameterVector(std::initializer_list<double> coords) : coords_(coords) {
        if (coords_.empty()) throw ConfigError("ParameterVector: dimension must be >= 1");
    }

    explicit ParameterVector(std::vector<double> coords) : coords_(std::move(coords)) {
        if (coords_.empty()) throw ConfigError("ParameterVector: dimension must be >= 1");
    }

    static ParameterVector zeros(std::size_t dim) { return ParameterVector(dim, 0.0); }

    std::size_t dim() const { return coords_.size(); }
    bool empty() const { return coords_.empty(); }

    double operator[](std::size_t i) const { return coords_[i]; }
    double& operator[](std::size_t i) { return coords_[i]; }

    const std::vector<double>& coords() const { return coords_; }

    double norm() const {
        double s = 0.0;
        for (double c : coords_) s += c * c;
        return std::sqrt(s);
    }

    bool is_finite() const {
        for (double c : coords_) {
            if (!std::isfinite(c)) return false;
        }
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double c : coords_) m = std::max(m, std::abs(c));
        return m;
    }

    ParameterVector& operator+=(const ParameterVector& o) {
        require_same_dim(o, "operator+=");
        for (std::size_t i = 0; i < coords_.size(); ++i) coords_[i] += o.coords_[i];
        return *this;
    }

    ParameterVector& operator-=(const ParameterVector& o) {
        require_same_dim(o, "operator-=");
        for (std::size_t i = 0; i < coords_.size(); ++i) coords_[i] -= o.coords_[i];
        return *this;
    }

    ParameterVector& operator*=(double s) {
        for (double& c : coords_) c *= s;
        return *this;
    }

    friend ParameterVector operator+(ParameterVector a, const ParameterVector& b) { return a += b; }
    friend ParameterVector operator-(ParameterVector a, const ParameterVector& b) { return a -= b; }
    friend ParameterVector operator*(double s, ParameterVector v) { return v *= s; }
    friend ParameterVector operator*(ParameterVector v, double s) { return v *= s; }

    friend bool operator==(const ParameterVector& a, const ParameterVector& b) {
        return a.coords_ == b.coords_;
    }
    friend bool operator!=(const ParameterVector& a, const ParameterVector& b) { return !(a == b); }

    void require_same_dim(const ParameterVector& o, const char* what) const {
        if (coords_.size() != o.coords_.size()) {
            throw DimensionError(std::string(what) + ": dimension mismatch (" +
                                 std::to_string(coords_.size()) + " vs " +
                                 std::to_string(o.coords_.size()) + ")");
        }
    }

private:
    std::vector<double> coords_;
};

inline double dot(const ParameterVector& a, const ParameterVector& b) {
    a.require_same_dim(b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
    return s;
}

inline double distance(const ParameterVector& a, const ParameterVector& b) {
    a.require_same_dim(b, "distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace fedclip
