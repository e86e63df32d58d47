#pragma once

// Output-injection gains
//   p1(r,t)  = -1/2 p(r,1,t) D(1,t) - d/ds[p(r,s,t) D(s,t)]_{s=1}
//   p10(t)   = 1/2 + H(t) - p(1,1,t)

#include <algorithm>
#include <cstddef>
#include <vector>

#include "coeffs.hpp"
#include "errors.hpp"
#include "kernel_field.hpp"

namespace pdeobs {

struct ObserverGains {
    SpatialGrid grid;
    std::vector<double> times;
    std::vector<std::vector<double>> p1;  // [time][node]
    std::vector<double> p10;              // [time]

    // Linear interpolation between kernel time samples; constant when there is
    // only one sample.
    struct Sample {
        std::vector<double> p1;
        double p10;
    };
    Sample at(double t) const {
        if (times.size() == 1) return {p1.front(), p10.front()};
        constexpr double slack = 1e-9;
        if (t < times.front() - slack || t > times.back() + slack)
            throw config_error("gains do not cover t = " + std::to_string(t));
        std::size_t hi = 1;
        while (hi + 1 < times.size() && times[hi] < t) ++hi;
        const std::size_t lo = hi - 1;
        const double w = std::clamp((t - times[lo]) / (times[hi] - times[lo]), 0.0, 1.0);
        Sample s{std::vector<double>(p1[lo].size()), (1 - w) * p10[lo] + w * p10[hi]};
        for (std::size_t i = 0; i < s.p1.size(); ++i)
            s.p1[i] = (1 - w) * p1[lo][i] + w * p1[hi][i];
        return s;
    }

    bool covers(double t0, double t1) const {
        constexpr double slack = 1e-9;
        return times.size() == 1 || (t0 >= times.front() - slack && t1 <= times.back() + slack);
    }
};

// The s-derivative at s = 1 uses the three-point one-sided stencil. Rows
// r_{n-1} and r_n have fewer than three samples in [r, 1]; their p1 values are
// extrapolated quadratically in r from the three rows below.
inline ObserverGains compute_gains(const KernelField& p, const CoefficientSet& cs) {
    const auto& grid = p.grid();
    const std::size_t n = grid.cells();
    if (n < 5) throw resolution_error("gains need at least 5 grid cells");
    const double h = grid.step();
    ObserverGains g{grid, p.times(), {}, {}};
    for (std::size_t k = 0; k < p.time_count(); ++k) {
        const double t = p.times()[k];
        const double dn = cs.D().value(1.0, t);
        const double dn1 = cs.D().value(grid.node(n - 1), t);
        const double dn2 = cs.D().value(grid.node(n - 2), t);
        std::vector<double> row(n + 1);
        for (std::size_t i = 0; i + 2 <= n; ++i) {
            const double f0 = p(i, n, k) * dn, f1 = p(i, n - 1, k) * dn1, f2 = p(i, n - 2, k) * dn2;
            const double ds = (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * h);
            row[i] = -0.5 * f0 - ds;
        }
        row[n - 1] = 3.0 * row[n - 2] - 3.0 * row[n - 3] + row[n - 4];
        row[n] = 3.0 * row[n - 1] - 3.0 * row[n - 2] + row[n - 3];
        g.p1.push_back(std::move(row));
        g.p10.push_back(0.5 + eval_boundary_data(cs, t).H - p(n, n, k));
    }
    return g;
}

}  // namespace pdeobs
