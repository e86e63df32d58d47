#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace pdeobs::quad {

// Step used by every coefficient-space integral.
inline constexpr double default_step = 1e-3;

struct Estimate {
    double value = 0.0;
    double error = 0.0;  // Richardson estimate |S_h - S_2h| / 15
};

// Composite Simpson on [a, b] with an even number of panels whose width does
// not exceed `step`. The error estimate compares against the rule with twice
// the step; both share nodes so the second pass is free.
template <class F>
Estimate simpson(F&& f, double a, double b, double step = default_step) {
    if (b == a) return {};
    const double len = b - a;
    std::size_t m = static_cast<std::size_t>(std::ceil(std::abs(len) / step));
    if (m < 4) m = 4;
    m = (m + 3) / 4 * 4;  // divisible by 4 so that the coarse rule is also Simpson
    const double h = len / static_cast<double>(m);

    double fine = f(a) + f(b);
    double coarse = fine;
    for (std::size_t k = 1; k < m; ++k) {
        const double v = f(a + h * static_cast<double>(k));
        fine += (k % 2 ? 4.0 : 2.0) * v;
        if (k % 2 == 0) coarse += ((k / 2) % 2 ? 4.0 : 2.0) * v;
    }
    fine *= h / 3.0;
    coarse *= 2.0 * h / 3.0;
    return {fine, std::abs(fine - coarse) / 15.0};
}

// Same as simpson() but raises numerical_error when the estimate exceeds tol.
template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-9, double step = default_step) {
    const Estimate e = simpson(f, a, b, step);
    if (!std::isfinite(e.value) || e.error > tol * (1.0 + std::abs(e.value)))
        throw numerical_error("quadrature did not reach tolerance (estimate " +
                              std::to_string(e.error) + ")");
    return e.value;
}

// Running integral of f from x.front() to each x[k]. Every cell is split into
// panels no wider than `step` and integrated with Simpson's rule, so the
// result is O(step^4) accurate at every node.
template <class F>
std::vector<double> cumulative(F&& f, const std::vector<double>& x, double step = default_step) {
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t k = 1; k < x.size(); ++k) {
        const double a = x[k - 1];
        const double b = x[k];
        std::size_t m = static_cast<std::size_t>(std::ceil((b - a) / step));
        if (m < 1) m = 1;
        const double h = (b - a) / static_cast<double>(m);
        double s = 0.0;
        double left = f(a);
        for (std::size_t j = 0; j < m; ++j) {
            const double xl = a + h * static_cast<double>(j);
            const double right = f(j + 1 == m ? b : xl + h);
            s += h / 6.0 * (left + 4.0 * f(xl + 0.5 * h) + right);
            left = right;
        }
        out[k] = out[k - 1] + s;
    }
    return out;
}

// Trapezoid rule on uniformly spaced samples.
inline double trapezoid(const std::vector<double>& v, double h) {
    if (v.size() < 2) return 0.0;
    double s = 0.5 * (v.front() + v.back());
    for (std::size_t k = 1; k + 1 < v.size(); ++k) s += v[k];
    return s * h;
}

}  // namespace pdeobs::quad
