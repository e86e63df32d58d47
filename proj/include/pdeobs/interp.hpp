#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace pdeobs {

// Piecewise cubic Hermite interpolant on uniform nodes with exact slopes.
// O(h^4) when the slopes are exact derivatives.
class HermiteTable {
public:
    HermiteTable() = default;
    HermiteTable(double x0, double x1, std::vector<double> y, std::vector<double> dy)
        : x0_(x0), h_((x1 - x0) / static_cast<double>(y.size() - 1)), y_(std::move(y)),
          dy_(std::move(dy)) {
        if (y_.size() < 2 || y_.size() != dy_.size())
            throw shape_error("Hermite table needs matching value/slope arrays of length >= 2");
    }

    double operator()(double x) const {
        const std::size_t k = cell(x);
        return eval(k, (x - node(k)) / h_);
    }

    double derivative(double x) const {
        const std::size_t k = cell(x);
        const double s = (x - node(k)) / h_;
        const double s2 = s * s;
        return (6 * s2 - 6 * s) / h_ * y_[k] + (3 * s2 - 4 * s + 1) * dy_[k] +
               (-6 * s2 + 6 * s) / h_ * y_[k + 1] + (3 * s2 - 2 * s) * dy_[k + 1];
    }

    // Inverse of a strictly increasing table: bracket the cell, then
    // safeguarded Newton on the cubic.
    double inverse(double v) const {
        if (v <= y_.front()) return x0_;
        if (v >= y_.back()) return node(y_.size() - 1);
        const auto it = std::upper_bound(y_.begin(), y_.end(), v);
        const std::size_t k = static_cast<std::size_t>(it - y_.begin()) - 1;
        double lo = 0.0, hi = 1.0;
        double s = (v - y_[k]) / (y_[k + 1] - y_[k]);
        for (int iter = 0; iter < 60; ++iter) {
            const double f = eval(k, s) - v;
            if (f > 0) hi = s; else lo = s;
            const double df = derivative(node(k) + s * h_) * h_;
            double next = df > 0 ? s - f / df : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - s) < 1e-15) { s = next; break; }
            s = next;
        }
        return node(k) + s * h_;
    }

    double front() const { return y_.front(); }
    double back() const { return y_.back(); }
    const std::vector<double>& values() const { return y_; }
    double node(std::size_t k) const { return x0_ + h_ * static_cast<double>(k); }

private:
    std::size_t cell(double x) const {
        const double u = (x - x0_) / h_;
        if (u <= 0) return 0;
        return std::min(static_cast<std::size_t>(u), y_.size() - 2);
    }

    double eval(std::size_t k, double s) const {
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * y_[k] + (s3 - 2 * s2 + s) * h_ * dy_[k] +
               (-2 * s3 + 3 * s2) * y_[k + 1] + (s3 - s2) * h_ * dy_[k + 1];
    }

    double x0_ = 0.0, h_ = 1.0;
    std::vector<double> y_, dy_;
};

// Cubic Lagrange interpolation on the lattice triangle {0 <= a <= b <= N}
// using local ten-node P3 elements {(a0+i, b0+j) : 0 <= i <= j <= 3}, which
// have the same orientation as the domain and therefore always fit inside it.
class TriangleP3 {
public:
    // Returns weights for the ten element nodes and the element origin.
    struct Stencil {
        std::size_t a0, b0;
        std::array<double, 10> w;
    };

    static constexpr std::array<std::pair<int, int>, 10> nodes() {
        return {{{0, 0}, {0, 1}, {0, 2}, {0, 3}, {1, 1}, {1, 2}, {1, 3}, {2, 2}, {2, 3}, {3, 3}}};
    }

    // x, y in lattice units, 0 <= x <= y <= N, N >= 3.
    static Stencil stencil(double x, double y, std::size_t N) {
        if (N < 3) throw resolution_error("P3 interpolation needs at least 3 lattice cells");
        const auto clampi = [](long v, long lo, long hi) { return std::max(lo, std::min(v, hi)); };
        const long b0 = clampi(static_cast<long>(std::floor(y)) - 1, 0, static_cast<long>(N) - 3);
        const long a0 = clampi(static_cast<long>(std::floor(x)) - 1, 0, b0);
        const double u = x - static_cast<double>(a0);
        const double v = y - static_cast<double>(b0);
        const Eigen::Matrix<double, 10, 1> m = monomials(u, v);
        Stencil s{static_cast<std::size_t>(a0), static_cast<std::size_t>(b0), {}};
        const Eigen::Matrix<double, 10, 1> w = inverse_vandermonde().transpose() * m;
        for (int k = 0; k < 10; ++k) s.w[k] = w[k];
        return s;
    }

private:
    static Eigen::Matrix<double, 10, 1> monomials(double u, double v) {
        Eigen::Matrix<double, 10, 1> m;
        m << 1, u, v, u * u, u * v, v * v, u * u * u, u * u * v, u * v * v, v * v * v;
        return m;
    }

    static const Eigen::Matrix<double, 10, 10>& inverse_vandermonde() {
        static const Eigen::Matrix<double, 10, 10> inv = [] {
            Eigen::Matrix<double, 10, 10> V;
            const auto pts = nodes();
            for (int k = 0; k < 10; ++k)
                V.row(k) = monomials(pts[k].first, pts[k].second).transpose();
            return Eigen::Matrix<double, 10, 10>(V.inverse());
        }();
        return inv;
    }
};

}  // namespace pdeobs
