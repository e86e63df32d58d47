#pragma once

// Problem data for u_t = D u_rr + b u_r + phi_rxn u, u(0)=0, u_r(1) = u(1) + U(t),
// and the scalar fields derived from it after the advection-removing gauge.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "quadrature.hpp"

namespace pdeobs {

// Value and partials of a scalar field at one (r, t).
struct FieldSample {
    double v = 0.0;
    double r = 0.0;
    double rr = 0.0;
    double t = 0.0;
    double rt = 0.0;
};

enum class Partial { r, rr, t, rt };

inline const char* partial_name(Partial p) {
    switch (p) {
        case Partial::r: return "r";
        case Partial::rr: return "rr";
        case Partial::t: return "t";
        case Partial::rt: return "rt";
    }
    return "?";
}

// Scalar field on [0,1] x [0,T] with analytic partials. Built-in families are
// analytic on all of R^2, which the finite-difference checks rely on.
class Field {
public:
    using Eval = std::function<FieldSample(double, double)>;

    Field(std::string description, Eval eval, bool time_invariant)
        : description_(std::move(description)), eval_(std::move(eval)),
          time_invariant_(time_invariant) {}

    static Field constant(double c) {
        return {"constant(" + std::to_string(c) + ")",
                [c](double, double) { return FieldSample{c, 0, 0, 0, 0}; }, true};
    }

    // sum_k a_k r^k
    static Field poly_r(std::vector<double> a) {
        if (a.empty()) a.push_back(0.0);
        std::string d = "poly_r[";
        for (std::size_t k = 0; k < a.size(); ++k) d += (k ? "," : "") + std::to_string(a[k]);
        d += "]";
        return {d,
                [a = std::move(a)](double r, double) {
                    FieldSample s;
                    // Horner for the value and both derivatives.
                    for (std::size_t k = a.size(); k-- > 0;) {
                        s.rr = s.rr * r + 2.0 * s.r;
                        s.r = s.r * r + s.v;
                        s.v = s.v * r + a[k];
                    }
                    return s;
                },
                true};
    }

    // base + amp * sin(kr r + pr) * sin(kt t + pt)
    static Field separable(double base, double amp, double kr, double pr, double kt, double pt) {
        const bool ti = amp == 0.0 || kt == 0.0;
        return {"separable(" + std::to_string(base) + "+" + std::to_string(amp) + "*sin(" +
                    std::to_string(kr) + "r+" + std::to_string(pr) + ")*sin(" +
                    std::to_string(kt) + "t+" + std::to_string(pt) + "))",
                [=](double r, double t) {
                    const double sr = std::sin(kr * r + pr), cr = std::cos(kr * r + pr);
                    const double st = std::sin(kt * t + pt), ct = std::cos(kt * t + pt);
                    return FieldSample{base + amp * sr * st, amp * kr * cr * st,
                                       -amp * kr * kr * sr * st, amp * kt * sr * ct,
                                       amp * kr * kt * cr * ct};
                },
                ti};
    }

    // Replace one supplied partial by a constant. Used to inject faults when
    // exercising validate().
    Field with_partial(Partial which, double value) const {
        auto inner = eval_;
        return {description_ + " [d" + partial_name(which) + ":=" + std::to_string(value) + "]",
                [inner, which, value](double r, double t) {
                    FieldSample s = inner(r, t);
                    switch (which) {
                        case Partial::r: s.r = value; break;
                        case Partial::rr: s.rr = value; break;
                        case Partial::t: s.t = value; break;
                        case Partial::rt: s.rt = value; break;
                    }
                    return s;
                },
                time_invariant_ && ((which != Partial::t && which != Partial::rt) || value == 0.0)};
    }

    FieldSample operator()(double r, double t) const { return eval_(r, t); }
    double value(double r, double t) const { return eval_(r, t).v; }
    bool time_invariant() const { return time_invariant_; }
    const std::string& description() const { return description_; }

private:
    std::string description_;
    Eval eval_;
    bool time_invariant_;
};

// Boundary input U(t).
class Signal {
public:
    Signal(std::string description, std::function<double(double)> f)
        : description_(std::move(description)), f_(std::move(f)) {}

    static Signal constant(double c) {
        return {"constant(" + std::to_string(c) + ")", [c](double) { return c; }};
    }
    static Signal sine(double amp, double omega, double phase = 0.0) {
        return {"sine(" + std::to_string(amp) + "," + std::to_string(omega) + "," +
                    std::to_string(phase) + ")",
                [=](double t) { return amp * std::sin(omega * t + phase); }};
    }

    double operator()(double t) const { return f_(t); }
    const std::string& description() const { return description_; }

private:
    std::string description_;
    std::function<double(double)> f_;
};

// Immutable after construction; evaluation is pure and thread-safe.
class CoefficientSet {
public:
    CoefficientSet(Field D, Field b, Field phi_rxn, Signal U, double horizon)
        : D_(std::move(D)), b_(std::move(b)), phi_(std::move(phi_rxn)), U_(std::move(U)),
          horizon_(horizon) {
        if (!(horizon > 0.0) || !std::isfinite(horizon))
            throw config_error("horizon T must be positive and finite");
    }

    const Field& D() const { return D_; }
    const Field& b() const { return b_; }
    const Field& phi_rxn() const { return phi_; }
    const Signal& U() const { return U_; }
    double horizon() const { return horizon_; }

    bool time_invariant() const {
        return D_.time_invariant() && b_.time_invariant() && phi_.time_invariant();
    }
    // True when the gauge exponent b/2D does not depend on t.
    bool gauge_time_invariant() const { return D_.time_invariant() && b_.time_invariant(); }

    void check_domain(double r, double t) const {
        constexpr double slack = 1e-12;
        if (!(r >= -slack && r <= 1.0 + slack))
            throw range_error("r = " + std::to_string(r) + " outside [0,1]");
        if (!(t >= -slack && t <= horizon_ * (1.0 + slack) + slack))
            throw range_error("t = " + std::to_string(t) + " outside [0,T]");
    }

private:
    Field D_, b_, phi_;
    Signal U_;
    double horizon_;
};

// K equally spaced samples on [0, T]; K == 1 gives {0}.
inline std::vector<double> uniform_times(double T, std::size_t K) {
    if (K == 0) throw config_error("need at least one time sample");
    std::vector<double> t(K, 0.0);
    for (std::size_t k = 1; k < K; ++k)
        t[k] = k + 1 == K ? T : T * static_cast<double>(k) / static_cast<double>(K - 1);
    return t;
}

namespace detail {

// d/dt (b/D)
inline double dt_b_over_D(const CoefficientSet& cs, double r, double t) {
    const FieldSample d = cs.D()(r, t);
    const FieldSample b = cs.b()(r, t);
    return (b.t * d.v - b.v * d.t) / (d.v * d.v);
}

// lambda without the memory integral term
inline double lambda_local(const CoefficientSet& cs, double r, double t) {
    const FieldSample d = cs.D()(r, t);
    const FieldSample b = cs.b()(r, t);
    return cs.phi_rxn().value(r, t) - b.v * b.v / (4.0 * d.v) - 0.5 * b.r +
           b.v * d.r / (2.0 * d.v);
}

}  // namespace detail

// Reaction coefficient of the advection-free plant c_t = D c_rr + lambda c.
inline double eval_lambda(const CoefficientSet& cs, double r, double t) {
    cs.check_domain(r, t);
    double lam = detail::lambda_local(cs, r, t);
    if (!cs.gauge_time_invariant())
        lam += 0.5 * quad::integrate([&](double x) { return detail::dt_b_over_D(cs, x, t); }, 0.0, r);
    return lam;
}

// lambda(x_k, t) at increasing nodes starting from 0, sharing one running integral.
inline std::vector<double> lambda_profile(const CoefficientSet& cs, const std::vector<double>& x,
                                          double t) {
    std::vector<double> out(x.size());
    std::vector<double> memory(x.size(), 0.0);
    if (!cs.gauge_time_invariant())
        memory = quad::cumulative([&](double y) { return detail::dt_b_over_D(cs, y, t); }, x);
    for (std::size_t k = 0; k < x.size(); ++k)
        out[k] = detail::lambda_local(cs, x[k], t) + 0.5 * memory[k];
    return out;
}

// int_0^r b / (2D) dtau
inline double gauge_exponent(const CoefficientSet& cs, double r, double t) {
    return quad::integrate(
        [&](double x) { return cs.b().value(x, t) / (2.0 * cs.D().value(x, t)); }, 0.0, r);
}

struct BoundaryData {
    double M;
    double H;
};

inline BoundaryData eval_boundary_data(const CoefficientSet& cs, double t) {
    cs.check_domain(1.0, t);
    const double M = cs.U()(t) * std::exp(gauge_exponent(cs, 1.0, t));
    const double H = 1.0 + cs.b().value(1.0, t) / (2.0 * cs.D().value(1.0, t));
    return {M, H};
}

// Strict upper bound for the target reaction coefficient mu, with its parts.
struct MuBound {
    double bound;
    double max_abs_Drr;
    double min_D;
    double D_m;
};

inline MuBound mu_bound(const CoefficientSet& cs, const SpatialGrid& grid,
                        const std::vector<double>& t_samples) {
    if (t_samples.empty()) throw config_error("mu_bound needs at least one time sample");
    MuBound out{0.0, 0.0, std::numeric_limits<double>::infinity(), 0.0};
    for (double t : t_samples) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double r = grid.node(i);
            const FieldSample d = cs.D()(r, t);
            if (!(d.v > 0.0))
                throw invariant_error("D(" + std::to_string(r) + "," + std::to_string(t) +
                                      ") = " + std::to_string(d.v) + " is not positive");
            out.max_abs_Drr = std::max(out.max_abs_Drr, std::abs(d.rr));
            out.min_D = std::min(out.min_D, d.v);
        }
        const FieldSample d1 = cs.D()(1.0, t);
        out.D_m = std::max(out.D_m, std::max(0.0, -(d1.v + d1.r) / 2.0));
    }
    out.bound = 0.0 - (out.max_abs_Drr / 2.0 + out.D_m * out.D_m / out.min_D);
    return out;
}

// Target reaction coefficient. admissible() enforces mu < bound.
struct TargetParams {
    double mu;

    static TargetParams admissible(double mu, const MuBound& b) {
        if (!(mu < b.bound))
            throw invariant_error("mu = " + std::to_string(mu) + " is not below the bound " +
                                  std::to_string(b.bound));
        return {mu};
    }
};

inline bool is_admissible(double mu, const MuBound& b) { return mu < b.bound; }

struct PartialCheck {
    std::string field;  // e.g. "D_rr"
    double max_discrepancy;
    double tolerance;
    bool ok;
};

struct ValidationReport {
    bool positive = true;
    double min_D = std::numeric_limits<double>::infinity();
    std::optional<std::pair<double, double>> first_nonpositive;  // (r, t)
    std::vector<PartialCheck> partials;

    bool ok() const {
        return positive && std::all_of(partials.begin(), partials.end(),
                                       [](const PartialCheck& p) { return p.ok; });
    }
};

// Positivity of D and centered-difference consistency (step fd_step) of every
// supplied partial, over grid nodes x t_samples.
inline ValidationReport validate(const CoefficientSet& cs, const SpatialGrid& grid,
                                 const std::vector<double>& t_samples, double fd_step = 1e-3) {
    ValidationReport rep;
    const double h = fd_step;

    auto check = [&](const Field& f, const std::string& name) {
        double scale = 0.0;
        double dev[4] = {0, 0, 0, 0};
        for (double t : t_samples) {
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const double r = grid.node(i);
                const FieldSample s = f(r, t);
                const double rp = f.value(r + h, t), rm = f.value(r - h, t);
                const double tp = f.value(r, t + h), tm = f.value(r, t - h);
                const double fd_r = (rp - rm) / (2 * h);
                const double fd_rr = (rp - 2 * s.v + rm) / (h * h);
                const double fd_t = (tp - tm) / (2 * h);
                const double fd_rt = (f.value(r + h, t + h) - f.value(r + h, t - h) -
                                      f.value(r - h, t + h) + f.value(r - h, t - h)) /
                                     (4 * h * h);
                scale = std::max(scale, std::abs(s.v));
                dev[0] = std::max(dev[0], std::abs(fd_r - s.r));
                dev[1] = std::max(dev[1], std::abs(fd_rr - s.rr));
                dev[2] = std::max(dev[2], std::abs(fd_t - s.t));
                dev[3] = std::max(dev[3], std::abs(fd_rt - s.rt));
            }
        }
        const double tol = 1e-4 * (1.0 + scale);
        const Partial which[4] = {Partial::r, Partial::rr, Partial::t, Partial::rt};
        for (int k = 0; k < 4; ++k)
            rep.partials.push_back(
                {name + "_" + partial_name(which[k]), dev[k], tol, dev[k] <= tol});
    };

    for (double t : t_samples) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double d = cs.D().value(grid.node(i), t);
            rep.min_D = std::min(rep.min_D, d);
            if (!(d > 0.0) && rep.positive) {
                rep.positive = false;
                rep.first_nonpositive = std::pair{grid.node(i), t};
            }
        }
    }
    check(cs.D(), "D");
    check(cs.b(), "b");
    check(cs.phi_rxn(), "phi_rxn");
    return rep;
}

}  // namespace pdeobs
