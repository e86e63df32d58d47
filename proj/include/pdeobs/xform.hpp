#pragma once

// State transforms: the advection-removing gauge, the diffusion-normalizing
// coordinate map, and the Volterra transformation between error and target
// coordinates.

#include <cmath>
#include <cstddef>
#include <vector>

#include "coeffs.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "interp.hpp"
#include "kernel_field.hpp"
#include "quadrature.hpp"

namespace pdeobs {

// exp(int_0^{r_i} b/2D) at every grid node.
inline std::vector<double> gauge_factors(const CoefficientSet& cs, const SpatialGrid& grid,
                                         double t) {
    cs.check_domain(0.0, t);
    const auto expo = quad::cumulative(
        [&](double x) { return cs.b().value(x, t) / (2.0 * cs.D().value(x, t)); }, grid.nodes());
    std::vector<double> g(expo.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::exp(expo[i]);
    return g;
}

inline StateField gauge_forward(const StateField& u, const CoefficientSet& cs) {
    const auto g = gauge_factors(cs, u.grid, u.time);
    std::vector<double> c(u.values);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= g[i];
    return {u.grid, std::move(c), u.time, StateLabel::c};
}

inline StateField gauge_inverse(const StateField& c, const CoefficientSet& cs) {
    const auto g = gauge_factors(cs, c.grid, c.time);
    std::vector<double> u(c.values);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] /= g[i];
    return {c.grid, std::move(u), c.time, StateLabel::u};
}

// r-bar = sqrt(D(0,t)) int_0^r D(tau,t)^{-1/2} dtau
inline double phi_map(double r, double t, const CoefficientSet& cs) {
    cs.check_domain(r, t);
    const double sqrt_d0 = std::sqrt(cs.D().value(0.0, t));
    return sqrt_d0 *
           quad::integrate([&](double x) { return 1.0 / std::sqrt(cs.D().value(x, t)); }, 0.0, r,
                           1e-12);
}

inline double phi_inverse(double r_bar, double t, const CoefficientSet& cs) {
    const double len = phi_map(1.0, t, cs);
    constexpr double slack = 1e-12;
    if (!(r_bar >= -slack && r_bar <= len + slack))
        throw range_error("r_bar = " + std::to_string(r_bar) + " outside [0, " +
                          std::to_string(len) + "]");
    double lo = 0.0, hi = 1.0;
    while (hi - lo > 1e-13) {
        const double mid = 0.5 * (lo + hi);
        (phi_map(mid, t, cs) < r_bar ? lo : hi) = mid;
    }
    // Newton polish with d(r-bar)/dr = sqrt(D(0)/D(r)).
    double r = 0.5 * (lo + hi);
    const double slope = std::sqrt(cs.D().value(0.0, t) / cs.D().value(r, t));
    r -= (phi_map(r, t, cs) - r_bar) / slope;
    return std::clamp(r, 0.0, 1.0);
}

// Tabulated r -> r-bar at one instant, with O(h^4) Hermite interpolation in
// both directions. Tables for time-invariant D coincide at every t.
class CoordinateMap {
public:
    static constexpr std::size_t default_cells = 2000;

    CoordinateMap(const CoefficientSet& cs, double t, std::size_t cells = default_cells) : t_(t) {
        cs.check_domain(0.0, t);
        const double sqrt_d0 = std::sqrt(cs.D().value(0.0, t));
        std::vector<double> r(cells + 1);
        for (std::size_t k = 0; k <= cells; ++k)
            r[k] = k == cells ? 1.0 : static_cast<double>(k) / static_cast<double>(cells);
        auto inv_sqrt = [&](double x) { return 1.0 / std::sqrt(cs.D().value(x, t)); };
        auto bar = quad::cumulative(inv_sqrt, r, 1.0 / static_cast<double>(cells));
        std::vector<double> slope(r.size());
        for (std::size_t k = 0; k < r.size(); ++k) {
            bar[k] *= sqrt_d0;
            slope[k] = sqrt_d0 * inv_sqrt(r[k]);
            if (k > 0 && !(bar[k] > bar[k - 1]))
                throw numerical_error("coordinate map is not strictly increasing");
        }
        table_ = HermiteTable(0.0, 1.0, std::move(bar), std::move(slope));
        r_ = std::move(r);
    }

    double time() const { return t_; }
    double bar_length() const { return table_.back(); }
    double forward(double r) const { return table_(r); }
    double inverse(double r_bar) const { return table_.inverse(r_bar); }
    // d(r-bar)/dr
    double slope(double r) const { return table_.derivative(r); }

    const std::vector<double>& r_samples() const { return r_; }
    const std::vector<double>& bar_samples() const { return table_.values(); }

private:
    double t_;
    std::vector<double> r_;
    HermiteTable table_;
};

namespace detail {

inline void check_compatible(const KernelField& p, const StateField& f) {
    if (!(p.grid() == f.grid))
        throw shape_error("kernel grid has " + std::to_string(p.grid().cells()) +
                          " cells, field grid has " + std::to_string(f.grid.cells()));
}

}  // namespace detail

// c~(r) = w~(r) - int_r^1 p(r,s,t) w~(s) ds, trapezoid rule over grid nodes.
// The kernel layer is interpolated linearly to the field's time stamp.
inline StateField volterra_apply(const KernelField& p, const StateField& w) {
    detail::check_compatible(p, w);
    const auto layer = p.slice(w.time);
    const std::size_t n = w.grid.cells();
    const double h = w.grid.step();
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i <= n; ++i) {
        double integral = 0.0;
        if (i < n) {
            integral = 0.5 * (layer[KernelField::index(i, i)] * w[i] +
                              layer[KernelField::index(i, n)] * w[n]);
            for (std::size_t j = i + 1; j < n; ++j)
                integral += layer[KernelField::index(i, j)] * w[j];
            integral *= h;
        }
        out[i] = w[i] - integral;
    }
    return {w.grid, std::move(out), w.time, StateLabel::c_tilde};
}

// Exact inverse of the discrete volterra_apply: its matrix is upper
// triangular, so back-substitution from r = 1 recovers w~.
inline StateField volterra_invert(const KernelField& p, const StateField& c) {
    detail::check_compatible(p, c);
    const auto layer = p.slice(c.time);
    const std::size_t n = c.grid.cells();
    const double h = c.grid.step();
    std::vector<double> w(c.size());
    w[n] = c[n];
    for (std::size_t i = n; i-- > 0;) {
        double rhs = c[i] + 0.5 * h * layer[KernelField::index(i, n)] * w[n];
        for (std::size_t j = i + 1; j < n; ++j) rhs += h * layer[KernelField::index(i, j)] * w[j];
        const double diag = 1.0 - 0.5 * h * layer[KernelField::index(i, i)];
        if (std::abs(diag) < 1e-12)
            throw numerical_error("Volterra system is singular at node " + std::to_string(i));
        w[i] = rhs / diag;
    }
    return {c.grid, std::move(w), c.time, StateLabel::w_tilde};
}

}  // namespace pdeobs
