#pragma once

// Crank-Nicolson integration of the plant, its advection-free form, the
// observer, the error system and the target system, all of the form
//   v_t = d(r) v_rr + a(r) v_r + c(r) v + source(r),  v(0) = 0,
//   v_r(1) = alpha v(1) + beta,
// with coefficients frozen at t + dt/2, the Robin row discretized by the
// three-point one-sided stencil at t + dt and folded into a tridiagonal system.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "coeffs.hpp"
#include "errors.hpp"
#include "gains.hpp"
#include "grid.hpp"

namespace pdeobs {

// Coefficients sampled on the grid at one time.
struct CoefficientProfile {
    std::vector<double> D, b, phi, lambda;
    double H = 0.0;
    double gauge_exponent = 0.0;  // int_0^1 b/2D
};

// Samples coefficient profiles, reusing them when they do not depend on t.
class CoefficientSampler {
public:
    CoefficientSampler(const CoefficientSet& cs, SpatialGrid grid) : cs_(&cs), grid_(grid) {}

    const CoefficientSet& coefficients() const { return *cs_; }
    const SpatialGrid& grid() const { return grid_; }

    const CoefficientProfile& at(double t) {
        if (cached_ && (cs_->time_invariant() || cached_t_ == t)) return profile_;
        const auto nodes = grid_.nodes();
        CoefficientProfile p;
        p.D.resize(nodes.size());
        p.b.resize(nodes.size());
        p.phi.resize(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            p.D[i] = cs_->D().value(nodes[i], t);
            p.b[i] = cs_->b().value(nodes[i], t);
            p.phi[i] = cs_->phi_rxn().value(nodes[i], t);
        }
        p.lambda = lambda_profile(*cs_, nodes, t);
        p.H = 1.0 + p.b.back() / (2.0 * p.D.back());
        p.gauge_exponent = gauge_exponent(*cs_, 1.0, t);
        profile_ = std::move(p);
        cached_ = true;
        cached_t_ = t;
        return profile_;
    }

    BoundaryData boundary(double t) {
        if (cs_->gauge_time_invariant()) {
            const auto& p = at(t);
            return {cs_->U()(t) * std::exp(p.gauge_exponent), p.H};
        }
        return eval_boundary_data(*cs_, t);
    }

private:
    const CoefficientSet* cs_;
    SpatialGrid grid_;
    CoefficientProfile profile_;
    bool cached_ = false;
    double cached_t_ = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// Thomas algorithm; lower[0] and upper[m-1] are ignored.
inline std::vector<double> solve_tridiagonal(std::vector<double> lower, std::vector<double> diag,
                                             std::vector<double> upper, std::vector<double> rhs) {
    const std::size_t m = diag.size();
    for (std::size_t k = 1; k < m; ++k) {
        if (std::abs(diag[k - 1]) < 1e-300) throw numerical_error("tridiagonal solve broke down");
        const double f = lower[k] / diag[k - 1];
        diag[k] -= f * upper[k - 1];
        rhs[k] -= f * rhs[k - 1];
    }
    if (std::abs(diag[m - 1]) < 1e-300) throw numerical_error("tridiagonal solve broke down");
    std::vector<double> x(m);
    x[m - 1] = rhs[m - 1] / diag[m - 1];
    for (std::size_t k = m - 1; k-- > 0;) x[k] = (rhs[k] - upper[k] * x[k + 1]) / diag[k];
    return x;
}

struct ParabolicData {
    const std::vector<double>* d;
    const std::vector<double>* a;  // nullptr: no advection
    const std::vector<double>* c;  // nullptr: use reaction_const
    double reaction_const = 0.0;
    const std::vector<double>* source = nullptr;  // explicit, per node
    double alpha;
    double beta;
};

inline void check_step(const CoefficientSet& cs, double t, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw config_error("time step must be positive");
    if (t + dt > cs.horizon() * (1.0 + 1e-9))
        throw range_error("step to t = " + std::to_string(t + dt) + " passes the horizon T = " +
                          std::to_string(cs.horizon()));
}

inline std::vector<double> cn_step(const std::vector<double>& v, const ParabolicData& P,
                                   double h, double dt) {
    const std::size_t n = v.size() - 1;
    // unknowns v_1..v_n stored at k = i - 1
    std::vector<double> lo(n, 0.0), di(n, 0.0), up(n, 0.0), rhs(n, 0.0);
    const double ih2 = 1.0 / (h * h), i2h = 1.0 / (2.0 * h);
    for (std::size_t i = 1; i < n; ++i) {
        const double d = (*P.d)[i];
        const double a = P.a ? (*P.a)[i] : 0.0;
        const double c = P.c ? (*P.c)[i] : P.reaction_const;
        const double wl = d * ih2 - a * i2h, wc = -2.0 * d * ih2 + c, wr = d * ih2 + a * i2h;
        const std::size_t k = i - 1;
        lo[k] = -0.5 * dt * wl;
        di[k] = 1.0 - 0.5 * dt * wc;
        up[k] = -0.5 * dt * wr;
        rhs[k] = v[i] + 0.5 * dt * (wl * v[i - 1] + wc * v[i] + wr * v[i + 1]);
        if (P.source) rhs[k] += dt * (*P.source)[i];
    }
    // Robin row: (3 v_n - 4 v_{n-1} + v_{n-2}) / 2h - alpha v_n = beta
    double row_nm2 = i2h, row_nm1 = -4.0 * i2h, row_n = 3.0 * i2h - P.alpha, row_rhs = P.beta;
    if (n >= 2) {
        // eliminate v_{n-2} with the row of node n-1
        const std::size_t k = n - 2;
        const double f = row_nm2 / lo[k];
        row_nm1 -= f * di[k];
        row_n -= f * up[k];
        row_rhs -= f * rhs[k];
    }
    lo[n - 1] = row_nm1;
    di[n - 1] = row_n;
    rhs[n - 1] = row_rhs;
    const auto x = solve_tridiagonal(std::move(lo), std::move(di), std::move(up), std::move(rhs));
    std::vector<double> out(n + 1, 0.0);
    std::copy(x.begin(), x.end(), out.begin() + 1);
    return out;
}

}  // namespace detail

// u_t = D u_rr + b u_r + phi_rxn u,  u_r(1) = u(1) + U(t)
inline StateField step_plant(const StateField& u, CoefficientSampler& cs, double dt) {
    const double t = u.time;
    detail::check_step(cs.coefficients(), t, dt);
    const auto& P = cs.at(t + 0.5 * dt);
    detail::ParabolicData data{&P.D, &P.b, &P.phi, 0.0, nullptr, 1.0,
                               cs.coefficients().U()(t + dt)};
    return {u.grid, detail::cn_step(u.values, data, u.grid.step(), dt), t + dt, StateLabel::u};
}

// c_t = D c_rr + lambda c,  c_r(1) = H c(1) + M
inline StateField step_transformed_plant(const StateField& c, CoefficientSampler& cs, double dt) {
    const double t = c.time;
    detail::check_step(cs.coefficients(), t, dt);
    const auto [M, H] = cs.boundary(t + dt);
    const auto& P = cs.at(t + 0.5 * dt);
    detail::ParabolicData data{&P.D, nullptr, &P.lambda, 0.0, nullptr, H, M};
    return {c.grid, detail::cn_step(c.values, data, c.grid.step(), dt), t + dt, StateLabel::c};
}

// Observer driven by the single measurement y = c(1,t); the injection
// p1 (y - c_hat(1)) and p10 (y - c_hat(1)) is evaluated at time t.
inline StateField step_observer(const StateField& c_hat, CoefficientSampler& cs,
                                const ObserverGains& gains, double y, double dt) {
    const double t = c_hat.time;
    detail::check_step(cs.coefficients(), t, dt);
    if (!gains.covers(t, t + dt))
        throw config_error("gains do not cover [" + std::to_string(t) + ", " +
                           std::to_string(t + dt) + "]");
    const auto g = gains.at(t);
    const double innovation = y - c_hat.values.back();
    std::vector<double> src(g.p1.size());
    for (std::size_t i = 0; i < src.size(); ++i) src[i] = g.p1[i] * innovation;
    const auto [M, H] = cs.boundary(t + dt);
    const auto& P = cs.at(t + 0.5 * dt);
    detail::ParabolicData data{&P.D, nullptr, &P.lambda, 0.0, &src, H, M + g.p10 * innovation};
    return {c_hat.grid, detail::cn_step(c_hat.values, data, c_hat.grid.step(), dt), t + dt,
            StateLabel::c_hat};
}

// c~_t = D c~_rr + lambda c~ - p1 c~(1),  c~_r(1) = (H - p10) c~(1),
// with the same explicit treatment of the injection as step_observer.
inline StateField step_error(const StateField& e, CoefficientSampler& cs,
                             const ObserverGains& gains, double dt) {
    const double t = e.time;
    detail::check_step(cs.coefficients(), t, dt);
    if (!gains.covers(t, t + dt)) throw config_error("gains do not cover the step");
    const auto g = gains.at(t);
    const double e1 = e.values.back();
    std::vector<double> src(g.p1.size());
    for (std::size_t i = 0; i < src.size(); ++i) src[i] = -g.p1[i] * e1;
    const double H = cs.boundary(t + dt).H;
    const auto& P = cs.at(t + 0.5 * dt);
    detail::ParabolicData data{&P.D, nullptr, &P.lambda, 0.0, &src, H, -g.p10 * e1};
    return {e.grid, detail::cn_step(e.values, data, e.grid.step(), dt), t + dt,
            StateLabel::c_tilde};
}

// w~_t = D w~_rr + mu w~,  w~_r(1) = -w~(1)/2
inline StateField step_target(const StateField& w, CoefficientSampler& cs, double mu, double dt) {
    const double t = w.time;
    detail::check_step(cs.coefficients(), t, dt);
    const auto& P = cs.at(t + 0.5 * dt);
    detail::ParabolicData data{&P.D, nullptr, nullptr, mu, nullptr, -0.5, 0.0};
    return {w.grid, detail::cn_step(w.values, data, w.grid.step(), dt), t + dt,
            StateLabel::w_tilde};
}

// Convenience overloads that sample the coefficients for a single step.
inline StateField step_plant(const StateField& u, const CoefficientSet& cs, double dt) {
    CoefficientSampler s(cs, u.grid);
    return step_plant(u, s, dt);
}
inline StateField step_target(const StateField& w, const CoefficientSet& cs, double mu, double dt) {
    CoefficientSampler s(cs, w.grid);
    return step_target(w, s, mu, dt);
}

// W = 1/2 int_0^1 w~^2 dr
inline double lyapunov_W(const StateField& w) {
    const double n = l2_norm(w);
    return 0.5 * n * n;
}

struct DecayFit {
    double sigma = 0.0;     // slope of log(norm) against t
    double residual = 0.0;  // RMS residual of the log fit
    bool converged = false; // a sample in the window had reached round-off
    std::size_t samples = 0;
};

// Least-squares line through log(norm) over the window that skips the first
// `skip_fraction` of the recorded horizon.
inline DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& norm,
                          double skip_fraction = 0.1) {
    if (t.size() != norm.size()) throw shape_error("fit_decay: mismatched series");
    if (t.size() < 10) throw config_error("fit_decay needs at least 10 samples");
    const double t_start = t.front() + skip_fraction * (t.back() - t.front());
    const double floor = 1e-12 * std::max(norm.front(), 1e-300);
    DecayFit fit;
    std::vector<double> x, y;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < t_start) continue;
        if (!(norm[k] > floor) || !(norm[k] > 0.0)) {
            fit.converged = true;
            break;
        }
        x.push_back(t[k]);
        y.push_back(std::log(norm[k]));
    }
    fit.samples = x.size();
    if (x.size() < 2) return fit;
    const double m = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) { sx += x[k]; sy += y[k]; }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    fit.sigma = sxx > 0 ? sxy / sxx : 0.0;
    double ss = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double e = y[k] - (my + fit.sigma * (x[k] - mx));
        ss += e * e;
    }
    fit.residual = std::sqrt(ss / m);
    return fit;
}

}  // namespace pdeobs
