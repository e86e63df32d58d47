#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace pdeobs {

// p(r_i, s_j, t_k) on the triangle i <= j of a spatial grid, one layer per
// time sample. A single time sample stands for a time-invariant kernel.
class KernelField {
public:
    KernelField(SpatialGrid grid, std::vector<double> times)
        : grid_(grid), times_(std::move(times)),
          layers_(times_.size(), std::vector<double>(tri_size(grid.size()), 0.0)) {
        if (times_.empty()) throw shape_error("kernel needs at least one time sample");
        for (std::size_t k = 1; k < times_.size(); ++k)
            if (!(times_[k] > times_[k - 1]))
                throw shape_error("kernel time samples must be strictly increasing");
    }

    static std::size_t tri_size(std::size_t nodes) { return nodes * (nodes + 1) / 2; }
    static std::size_t index(std::size_t i, std::size_t j) { return j * (j + 1) / 2 + i; }

    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return layers_[k][index(i, j)];
    }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        if (i > j || j >= grid_.size() || k >= times_.size())
            throw range_error("kernel index (" + std::to_string(i) + "," + std::to_string(j) +
                              "," + std::to_string(k) + ") outside the triangle");
        return layers_[k][index(i, j)];
    }

    const SpatialGrid& grid() const { return grid_; }
    const std::vector<double>& times() const { return times_; }
    std::size_t time_count() const { return times_.size(); }
    const std::vector<double>& layer(std::size_t k) const { return layers_[k]; }
    std::vector<double>& layer(std::size_t k) { return layers_[k]; }

    // Bracketing samples and weight for time t (linear interpolation).
    struct TimeWeight {
        std::size_t lo, hi;
        double w_hi;
    };
    TimeWeight locate(double t) const {
        if (times_.size() == 1) return {0, 0, 0.0};
        constexpr double slack = 1e-9;
        if (t < times_.front() - slack || t > times_.back() + slack)
            throw shape_error("time " + std::to_string(t) + " outside kernel time samples");
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        std::size_t hi = static_cast<std::size_t>(it - times_.begin());
        hi = std::clamp<std::size_t>(hi, 1, times_.size() - 1);
        const std::size_t lo = hi - 1;
        const double w = std::clamp((t - times_[lo]) / (times_[hi] - times_[lo]), 0.0, 1.0);
        return {lo, hi, w};
    }

    // Triangular layer at time t.
    std::vector<double> slice(double t) const {
        const TimeWeight tw = locate(t);
        if (tw.w_hi == 0.0) return layers_[tw.lo];
        if (tw.w_hi == 1.0) return layers_[tw.hi];
        std::vector<double> out(layers_[tw.lo].size());
        for (std::size_t q = 0; q < out.size(); ++q)
            out[q] = (1 - tw.w_hi) * layers_[tw.lo][q] + tw.w_hi * layers_[tw.hi][q];
        return out;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& l : layers_)
            for (double v : l) m = std::max(m, std::abs(v));
        return m;
    }

    // Solver metadata (filled by the kernel solvers).
    int iterations = 0;
    double tail_norm = 0.0;
    std::vector<double> iterate_norms;  // max-abs of each series term

private:
    SpatialGrid grid_;
    std::vector<double> times_;
    std::vector<std::vector<double>> layers_;
};

}  // namespace pdeobs
