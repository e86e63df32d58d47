#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace pdeobs {

// Uniform nodes r_i = i/n on [0, 1].
class SpatialGrid {
public:
    explicit SpatialGrid(std::size_t n_cells) : n_(n_cells) {
        if (n_cells < 2) throw config_error("grid needs at least 2 cells");
    }

    std::size_t cells() const { return n_; }
    std::size_t size() const { return n_ + 1; }
    double step() const { return 1.0 / static_cast<double>(n_); }
    double node(std::size_t i) const {
        return i == n_ ? 1.0 : static_cast<double>(i) / static_cast<double>(n_);
    }

    std::vector<double> nodes() const {
        std::vector<double> r(size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = node(i);
        return r;
    }

    bool operator==(const SpatialGrid&) const = default;

private:
    std::size_t n_;
};

enum class StateLabel { u, u_hat, c, c_hat, c_tilde, w_tilde };

inline std::string_view to_string(StateLabel l) {
    switch (l) {
        case StateLabel::u: return "u";
        case StateLabel::u_hat: return "u_hat";
        case StateLabel::c: return "c";
        case StateLabel::c_hat: return "c_hat";
        case StateLabel::c_tilde: return "c_tilde";
        case StateLabel::w_tilde: return "w_tilde";
    }
    return "?";
}

// A PDE state sampled on the grid at one instant.
struct StateField {
    StateField(SpatialGrid grid, std::vector<double> values, double time, StateLabel label)
        : grid(grid), values(std::move(values)), time(time), label(label) {
        if (this->values.size() != grid.size())
            throw shape_error("state has " + std::to_string(this->values.size()) +
                              " values for a grid of " + std::to_string(grid.size()) + " nodes");
        for (double v : this->values)
            if (!std::isfinite(v)) throw numerical_error("non-finite state value");
    }

    static StateField zeros(SpatialGrid grid, double time, StateLabel label) {
        return {grid, std::vector<double>(grid.size(), 0.0), time, label};
    }

    template <class F>
    static StateField sample(SpatialGrid grid, F&& f, double time, StateLabel label) {
        std::vector<double> v(grid.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.node(i));
        return {grid, std::move(v), time, label};
    }

    double operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const { return values.size(); }

    SpatialGrid grid;
    std::vector<double> values;
    double time;
    StateLabel label;
};

// L2(0,1) norm by the trapezoid rule.
inline double l2_norm(const StateField& f) {
    const auto& v = f.values;
    double s = 0.5 * (v.front() * v.front() + v.back() * v.back());
    for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i] * v[i];
    return std::sqrt(s * f.grid.step());
}

inline double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace pdeobs
