#pragma once

// Observer kernel p(r,s,t) on 0 <= r <= s <= 1:
//
//   p_t = D(r) p_rr - (D(s) p)_ss - (mu - lambda(r)) p
//   p(r,r,t) = 1/(2 sqrt D(r,t)) int_0^r (mu - lambda)/sqrt D dtau
//   p(0,s,t) = 0
//
// solve_kernel() normalizes to psi(xi, eta, t) in characteristic variables
// xi = r_bar + s_bar, eta = r_bar - s_bar and sums the successive
// approximation series; solve_kernel_direct() marches the time-invariant
// Goursat problem with a box scheme and serves as its oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

#include "coeffs.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "interp.hpp"
#include "kernel_field.hpp"
#include "quadrature.hpp"
#include "xform.hpp"

namespace pdeobs {

// L(y,t) = 1/4 d_y(D_y / sqrt D) sqrt(D(y)) / D(0) + D_y^2 / (16 D D(0))
inline double eval_L(const CoefficientSet& cs, double y, double t) {
    cs.check_domain(y, t);
    const FieldSample d = cs.D()(y, t);
    const double d0 = cs.D().value(0.0, t);
    const double sq = std::sqrt(d.v);
    const double d_ratio = d.rr / sq - d.r * d.r / (2.0 * d.v * sq);  // d_y(D_y/sqrt D)
    return 0.25 * d_ratio * sq / d0 + d.r * d.r / (16.0 * d.v * d0);
}

namespace detail {

// lambda_bar = alpha(r) + beta(s)
inline double lambda_bar_alpha(const CoefficientSet& cs, double mu, double r, double t,
                               double lambda_r) {
    const FieldSample d = cs.D()(r, t);
    const double d0 = cs.D().value(0.0, t);
    return -d.r * d.r / (8.0 * d.v) + d0 * eval_L(cs, r, t) - d.t / (4.0 * d.v) -
           (mu - lambda_r);
}

inline double lambda_bar_beta(const CoefficientSet& cs, double s, double t) {
    const FieldSample d = cs.D()(s, t);
    const double d0 = cs.D().value(0.0, t);
    return d.r * d.r / (8.0 * d.v) - d0 * eval_L(cs, s, t) - d.t / (4.0 * d.v) + d.t / d.v;
}

}  // namespace detail

// Reaction coefficient of the normalized kernel equation
// p_bar_t = D(0,t)(p_bar_{r r} - p_bar_{s s}) + lambda_bar p_bar.
inline double eval_lambda_bar(const CoefficientSet& cs, double mu, double r, double s, double t) {
    if (r > s) throw range_error("lambda_bar needs r <= s");
    return detail::lambda_bar_alpha(cs, mu, r, t, eval_lambda(cs, r, t)) +
           detail::lambda_bar_beta(cs, s, t);
}

// Zeroth successive-approximation iterate: the integral over [-eta, xi] of the
// xi-derivative of the diagonal data,
//   psi0 = 1/2 int_{y1}^{y2} (mu - lambda(y))/sqrt D(y) dy,
//   y1 = phi^-1(-eta/2), y2 = phi^-1(xi/2).
// For constant mu - lambda this is (mu - lambda)(xi + eta)/(4 sqrt D(0,t)).
inline double psi_initial(const CoefficientSet& cs, double mu, double xi, double eta, double t) {
    if (eta > 0.0 || xi < -eta) throw range_error("psi domain is -xi <= eta <= 0");
    const double y2 = phi_inverse(0.5 * xi, t, cs);
    const double y1 = phi_inverse(-0.5 * eta, t, cs);
    return 0.5 * quad::integrate(
                     [&](double y) {
                         return (mu - eval_lambda(cs, y, t)) / std::sqrt(cs.D().value(y, t));
                     },
                     y1, y2);
}

// Precomputed geometry and coefficients of the psi lattice for every time
// sample. Lattice node (i, j) sits at xi = i*delta, eta = -j*delta with
// 0 <= j <= i and i + j <= 2N, delta = bar_length(t)/N; it corresponds to
// r_bar = (i-j) delta/2 and s_bar = (i+j) delta/2. Nodes with i + j even form
// the uniform (r_bar, s_bar) grid of spacing delta.
class PsiLattice {
public:
    struct Layer {
        double t;
        double d0;
        double delta;
        double bar_length;
        std::shared_ptr<const CoordinateMap> map;
        HermiteTable Q;                // Q(y) = 1/2 int_0^y (mu - lambda)/sqrt D
        std::vector<double> half_r;    // phi^-1(k delta / 2), k = 0..2N
        std::vector<double> q_half;    // Q(half_r[k])
        std::vector<double> alpha;     // lambda_bar part depending on r, at half_r
        std::vector<double> beta;      // lambda_bar part depending on s, at half_r
        double bar_length_rate = 0.0;  // d(bar_length)/dt
    };

    static std::shared_ptr<const PsiLattice> build(const CoefficientSet& cs, double mu,
                                                   std::size_t N,
                                                   const std::vector<double>& t_samples) {
        if (N < 3) throw resolution_error("psi lattice needs at least 3 cells");
        if (t_samples.empty()) throw config_error("kernel needs at least one time sample");
        auto lat = std::shared_ptr<PsiLattice>(new PsiLattice);
        lat->N_ = N;
        lat->mu_ = mu;
        lat->times_ = t_samples;
        lat->time_varying_ = !cs.time_invariant();
        if (lat->time_varying_ && t_samples.size() < 3)
            throw config_error("time-varying coefficients need at least 3 kernel time samples");
        for (std::size_t k = 0; k < t_samples.size(); ++k) {
            if (!lat->time_varying_ && k > 0) {
                Layer copy = lat->layers_.front();
                copy.t = t_samples[k];
                lat->layers_.push_back(std::move(copy));
            } else {
                lat->layers_.push_back(make_layer(cs, mu, N, t_samples[k]));
            }
        }
        if (lat->time_varying_) {
            std::vector<double> len(t_samples.size());
            for (std::size_t k = 0; k < len.size(); ++k) len[k] = lat->layers_[k].bar_length;
            const auto rate = time_derivative(t_samples, len);
            for (std::size_t k = 0; k < len.size(); ++k) lat->layers_[k].bar_length_rate = rate[k];
        }
        // Offsets of each lattice column i.
        lat->offset_.resize(2 * N + 2, 0);
        for (std::size_t i = 0; i <= 2 * N; ++i)
            lat->offset_[i + 1] = lat->offset_[i] + lat->column_height(i) + 1;
        return lat;
    }

    std::size_t cells() const { return N_; }
    double mu() const { return mu_; }
    bool time_varying() const { return time_varying_; }
    const std::vector<double>& times() const { return times_; }
    const Layer& layer(std::size_t k) const { return layers_[k]; }
    std::size_t time_count() const { return layers_.size(); }

    // Largest j in column i.
    std::size_t column_height(std::size_t i) const { return std::min(i, 2 * N_ - i); }
    std::size_t size() const { return offset_.back(); }
    std::size_t index(std::size_t i, std::size_t j) const { return offset_[i] + j; }
    bool contains(long i, long j) const {
        return i >= 0 && j >= 0 && i <= static_cast<long>(2 * N_) &&
               j <= static_cast<long>(column_height(static_cast<std::size_t>(i)));
    }

    // Derivative along a sampled time axis: centered inside, one-sided
    // second order at the ends (non-uniform spacing allowed).
    static std::vector<double> time_derivative(const std::vector<double>& t,
                                               const std::vector<double>& v) {
        const std::size_t K = t.size();
        std::vector<double> d(K, 0.0);
        if (K < 3) return d;
        auto three_point = [&](std::size_t a, std::size_t b, std::size_t c, double x) {
            // derivative at x of the quadratic through (t_a,v_a),(t_b,v_b),(t_c,v_c)
            const double ta = t[a], tb = t[b], tc = t[c];
            return v[a] * ((x - tb) + (x - tc)) / ((ta - tb) * (ta - tc)) +
                   v[b] * ((x - ta) + (x - tc)) / ((tb - ta) * (tb - tc)) +
                   v[c] * ((x - ta) + (x - tb)) / ((tc - ta) * (tc - tb));
        };
        d[0] = three_point(0, 1, 2, t[0]);
        for (std::size_t k = 1; k + 1 < K; ++k) d[k] = three_point(k - 1, k, k + 1, t[k]);
        d[K - 1] = three_point(K - 3, K - 2, K - 1, t[K - 1]);
        return d;
    }

private:
    PsiLattice() = default;

    static Layer make_layer(const CoefficientSet& cs, double mu, std::size_t N, double t) {
        Layer L;
        L.t = t;
        L.d0 = cs.D().value(0.0, t);
        L.map = std::make_shared<const CoordinateMap>(cs, t);
        L.bar_length = L.map->bar_length();
        L.delta = L.bar_length / static_cast<double>(N);

        // Q on a fine uniform grid: Simpson per cell, lambda sampled at cell
        // midpoints as well.
        const std::size_t M = CoordinateMap::default_cells;
        std::vector<double> fine(2 * M + 1);
        for (std::size_t k = 0; k < fine.size(); ++k)
            fine[k] = k + 1 == fine.size() ? 1.0 : static_cast<double>(k) / (2.0 * M);
        const auto lam = lambda_profile(cs, fine, t);
        std::vector<double> integrand(fine.size());
        for (std::size_t k = 0; k < fine.size(); ++k)
            integrand[k] = 0.5 * (mu - lam[k]) / std::sqrt(cs.D().value(fine[k], t));
        std::vector<double> q(M + 1, 0.0), dq(M + 1);
        const double h = 1.0 / static_cast<double>(M);
        for (std::size_t c = 0; c < M; ++c)
            q[c + 1] = q[c] + h / 6.0 *
                                  (integrand[2 * c] + 4.0 * integrand[2 * c + 1] +
                                   integrand[2 * c + 2]);
        for (std::size_t c = 0; c <= M; ++c) dq[c] = integrand[2 * c];
        L.Q = HermiteTable(0.0, 1.0, std::move(q), std::move(dq));

        L.half_r.resize(2 * N + 1);
        for (std::size_t k = 0; k <= 2 * N; ++k)
            L.half_r[k] = k == 0 ? 0.0 : L.map->inverse(0.5 * L.delta * static_cast<double>(k));
        const auto lam_half = lambda_profile(cs, L.half_r, t);
        L.q_half.resize(L.half_r.size());
        L.alpha.resize(L.half_r.size());
        L.beta.resize(L.half_r.size());
        for (std::size_t k = 0; k < L.half_r.size(); ++k) {
            const double y = std::min(L.half_r[k], 1.0);
            L.q_half[k] = L.Q(y);
            L.alpha[k] = detail::lambda_bar_alpha(cs, mu, y, t, lam_half[k]);
            L.beta[k] = detail::lambda_bar_beta(cs, y, t);
        }
        return L;
    }

    std::size_t N_ = 0;
    double mu_ = 0.0;
    bool time_varying_ = false;
    std::vector<double> times_;
    std::vector<Layer> layers_;
    std::vector<std::size_t> offset_;
};

// One successive-approximation iterate psi^n on every lattice node and time sample.
struct PsiField {
    std::shared_ptr<const PsiLattice> lattice;
    std::vector<std::vector<double>> values;  // [time][lattice index]
    int iterate = 0;

    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return values[k][lattice->index(i, j)];
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& v : values)
            for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
};

inline PsiField psi_start(std::shared_ptr<const PsiLattice> lat) {
    PsiField f{lat, {}, 0};
    const std::size_t N = lat->cells();
    for (std::size_t k = 0; k < lat->time_count(); ++k) {
        const auto& L = lat->layer(k);
        std::vector<double> v(lat->size());
        for (std::size_t i = 0; i <= 2 * N; ++i)
            for (std::size_t j = 0; j <= lat->column_height(i); ++j)
                v[lat->index(i, j)] = L.q_half[i] - L.q_half[j];
        f.values.push_back(std::move(v));
    }
    return f;
}

namespace detail {

// psi_t at fixed (xi, eta). The lattice of layer k is scaled by
// bar_length(t_k), so the index-wise time derivative picks up the
// coordinate stretch: psi_t = dH/dt - (l'/l)(xi psi_xi + eta psi_eta).
inline std::vector<std::vector<double>> psi_time_derivative(const PsiField& f) {
    const auto& lat = *f.lattice;
    const std::size_t K = lat.time_count();
    std::vector<std::vector<double>> out(K, std::vector<double>(lat.size(), 0.0));
    if (!lat.time_varying()) return out;

    std::vector<double> series(K);
    for (std::size_t q = 0; q < lat.size(); ++q) {
        for (std::size_t k = 0; k < K; ++k) series[k] = f.values[k][q];
        const auto d = PsiLattice::time_derivative(lat.times(), series);
        for (std::size_t k = 0; k < K; ++k) out[k][q] = d[k];
    }

    const std::size_t N = lat.cells();
    for (std::size_t k = 0; k < K; ++k) {
        const auto& L = lat.layer(k);
        const double stretch = L.bar_length_rate / L.bar_length;
        if (stretch == 0.0) continue;
        const auto& v = f.values[k];
        auto at = [&](long i, long j) { return v[lat.index(i, j)]; };
        // derivative along one lattice direction in index units
        auto diff = [&](long i, long j, long di, long dj) {
            const bool fwd = lat.contains(i + di, j + dj), bwd = lat.contains(i - di, j - dj);
            if (fwd && bwd) return 0.5 * (at(i + di, j + dj) - at(i - di, j - dj));
            if (fwd && lat.contains(i + 2 * di, j + 2 * dj))
                return -1.5 * at(i, j) + 2.0 * at(i + di, j + dj) - 0.5 * at(i + 2 * di, j + 2 * dj);
            if (bwd && lat.contains(i - 2 * di, j - 2 * dj))
                return 1.5 * at(i, j) - 2.0 * at(i - di, j - dj) + 0.5 * at(i - 2 * di, j - 2 * dj);
            if (fwd) return at(i + di, j + dj) - at(i, j);
            if (bwd) return at(i, j) - at(i - di, j - dj);
            return 0.0;
        };
        for (std::size_t i = 0; i <= 2 * N; ++i) {
            for (std::size_t j = 0; j <= lat.column_height(i); ++j) {
                const long li = static_cast<long>(i), lj = static_cast<long>(j);
                // xi psi_xi + eta psi_eta in index units: i d_i + j d_j
                // (eta = -j delta and d_eta = -d_j / delta).
                const double euler = static_cast<double>(i) * diff(li, lj, 1, 0) +
                                     static_cast<double>(j) * diff(li, lj, 0, 1);
                out[k][lat.index(i, j)] -= stretch * euler;
            }
        }
    }
    return out;
}

}  // namespace detail

// psi^{n+1}(xi, eta) = 1/(4 D(0,t)) int_{-eta}^{xi} int_0^{eta} (psi^n_t - lambda_bar psi^n) ds dtau
// Nested trapezoid rule; the inner integral runs from 0 down to eta <= 0, so it
// is evaluated as -int_eta^0.
inline PsiField psi_iterate(const PsiField& prev) {
    const auto& lat = *prev.lattice;
    const std::size_t N = lat.cells();
    const auto psi_t = detail::psi_time_derivative(prev);
    PsiField next{prev.lattice, {}, prev.iterate + 1};
    next.values.resize(lat.time_count());

    for (std::size_t k = 0; k < lat.time_count(); ++k) {
        const auto& L = lat.layer(k);
        const double delta = L.delta;
        const auto& v = prev.values[k];
        std::vector<double> g(lat.size());
        for (std::size_t i = 0; i <= 2 * N; ++i)
            for (std::size_t j = 0; j <= lat.column_height(i); ++j) {
                const std::size_t q = lat.index(i, j);
                g[q] = psi_t[k][q] - (L.alpha[i - j] + L.beta[i + j]) * v[q];
            }
        // G(i, j) = int_{-j delta}^0 g(xi_i, sigma) dsigma
        std::vector<double> G(lat.size(), 0.0);
        for (std::size_t i = 0; i <= 2 * N; ++i)
            for (std::size_t j = 1; j <= lat.column_height(i); ++j)
                G[lat.index(i, j)] = G[lat.index(i, j - 1)] +
                                     0.5 * delta * (g[lat.index(i, j - 1)] + g[lat.index(i, j)]);
        // T(i, j) = int_{j delta}^{i delta} G(tau, j) dtau, marching in i.
        std::vector<double> out(lat.size(), 0.0);
        const double scale = -1.0 / (4.0 * L.d0);
        for (std::size_t j = 1; j <= N; ++j) {
            double T = 0.0;
            for (std::size_t i = j + 1; i + j <= 2 * N; ++i) {
                T += 0.5 * delta * (G[lat.index(i - 1, j)] + G[lat.index(i, j)]);
                out[lat.index(i, j)] = scale * T;
            }
        }
        next.values[k] = std::move(out);
    }
    return next;
}

namespace detail {

// Evaluate a lattice function at (r_bar, s_bar) by P3 interpolation on the
// uniform (r_bar, s_bar) sub-lattice (nodes with i + j even).
inline double lattice_interpolate(const PsiLattice& lat, const std::vector<double>& v,
                                  double r_bar, double s_bar, double delta) {
    const double N = static_cast<double>(lat.cells());
    double y = std::clamp(s_bar / delta, 0.0, N);
    double x = std::clamp(r_bar / delta, 0.0, y);
    const auto st = TriangleP3::stencil(x, y, lat.cells());
    const auto pts = TriangleP3::nodes();
    double out = 0.0;
    for (int q = 0; q < 10; ++q) {
        const std::size_t a = st.a0 + static_cast<std::size_t>(pts[q].first);
        const std::size_t b = st.b0 + static_cast<std::size_t>(pts[q].second);
        out += st.w[q] * v[lat.index(a + b, b - a)];
    }
    return out;
}

}  // namespace detail

struct KernelOptions {
    double tol = 1e-10;
    int max_iter = 50;
};

// Successive approximation in normalized characteristic coordinates, mapped
// back through p_bar -> p_breve = (D(r)D(s))^{1/4} p_bar -> p = p_breve / D(s).
inline KernelField solve_kernel(const CoefficientSet& cs, double mu, const SpatialGrid& grid,
                                const std::vector<double>& t_samples,
                                const KernelOptions& opt = {}) {
    if (opt.max_iter < 1) throw config_error("max_iter must be at least 1");
    const auto lat = PsiLattice::build(cs, mu, grid.cells(), t_samples);

    PsiField iterate = psi_start(lat);
    std::vector<std::vector<double>> tail(lat->time_count(), std::vector<double>(lat->size(), 0.0));
    std::vector<double> norms{iterate.max_abs()};
    int count = 1;
    while (norms.back() >= opt.tol) {
        if (count >= opt.max_iter)
            throw convergence_error("kernel series did not converge after " +
                                        std::to_string(count) + " iterates (tail norm " +
                                        std::to_string(norms.back()) + ")",
                                    norms.back(), count);
        iterate = psi_iterate(iterate);
        ++count;
        for (std::size_t k = 0; k < tail.size(); ++k)
            for (std::size_t q = 0; q < tail[k].size(); ++q) tail[k][q] += iterate.values[k][q];
        norms.push_back(iterate.max_abs());
    }

    KernelField p(grid, t_samples);
    p.iterations = count;
    p.tail_norm = norms.back();
    p.iterate_norms = norms;
    const std::size_t n = grid.cells();
    for (std::size_t k = 0; k < lat->time_count(); ++k) {
        const auto& L = lat->layer(k);
        const double t = L.t;
        std::vector<double> r_bar(n + 1), d(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            r_bar[i] = L.map->forward(grid.node(i));
            d[i] = cs.D().value(grid.node(i), t);
        }
        for (std::size_t j = 0; j <= n; ++j) {
            for (std::size_t i = 1; i <= j; ++i) {
                const double psi0 = L.Q(L.map->inverse(0.5 * (r_bar[i] + r_bar[j]))) -
                                    L.Q(L.map->inverse(0.5 * (r_bar[j] - r_bar[i])));
                const double rest =
                    i == j ? 0.0
                           : detail::lattice_interpolate(*lat, tail[k], r_bar[i], r_bar[j], L.delta);
                p.at(i, j, k) = std::pow(d[i] * d[j], 0.25) / d[j] * (psi0 + rest);
            }
        }
    }
    return p;
}

// Box-scheme march of the time-invariant Goursat problem for
// p_breve = D(s) p in characteristic coordinates of the normalized map:
//   4 D0 q_xy = (c_r - c_s) q_x + (c_r + c_s) q_y + (mu - lambda(r)) q,
//   c = (D_y/2) sqrt(D0/D(y)),
// with q = sqrt(D) Q on the diagonal and q = 0 on r = 0.
inline KernelField solve_kernel_direct(const CoefficientSet& cs, double mu,
                                       const SpatialGrid& grid) {
    if (!cs.time_invariant())
        throw config_error("direct kernel solver supports time-invariant coefficients only");
    const double t = 0.0;
    const std::size_t N = grid.cells();
    const auto lat = PsiLattice::build(cs, mu, N, {t});
    const auto& L = lat->layer(0);
    const double delta = L.delta;
    const double d0 = L.d0;

    std::vector<double> c_adv(L.half_r.size()), mu_minus_lambda(L.half_r.size());
    const auto lam = lambda_profile(cs, L.half_r, t);
    for (std::size_t k = 0; k < L.half_r.size(); ++k) {
        const FieldSample d = cs.D()(std::min(L.half_r[k], 1.0), t);
        c_adv[k] = 0.5 * d.r * std::sqrt(d0 / d.v);
        mu_minus_lambda[k] = mu - lam[k];
    }

    std::vector<double> q(lat->size(), 0.0);
    for (std::size_t i = 0; i <= 2 * N; ++i) {
        const double y = std::min(L.half_r[i], 1.0);
        q[lat->index(i, 0)] = std::sqrt(cs.D().value(y, t)) * L.q_half[i];
    }
    const double inv_d2 = 1.0 / (delta * delta);
    const double inv_2d = 1.0 / (2.0 * delta);
    for (std::size_t j = 0; j < N; ++j) {
        for (std::size_t i = j + 1; i + j + 2 <= 2 * N; ++i) {
            const double A = q[lat->index(i, j)];
            const double B = q[lat->index(i + 1, j)];
            const double C = q[lat->index(i, j + 1)];
            // cell centre: r_bar half index i - j, s_bar half index i + j + 1
            const double cr = c_adv[i - j], cs_ = c_adv[i + j + 1];
            const double a = cr - cs_, b = cr + cs_, m = mu_minus_lambda[i - j];
            // Reaction term sampled on the cell's cross diagonal (B + C)/2, which
            // keeps the update explicit in it.
            const double coef_e = -4.0 * d0 * inv_d2 - a * inv_2d + b * inv_2d;
            const double rest = 4.0 * d0 * inv_d2 * (B + C - A) - a * inv_2d * (B - A - C) -
                                b * inv_2d * (A + B - C) - 0.5 * m * (B + C);
            q[lat->index(i + 1, j + 1)] = -rest / coef_e;
        }
    }

    KernelField p(grid, {t});
    p.iterations = 0;
    std::vector<double> r_bar(N + 1), d(N + 1);
    for (std::size_t i = 0; i <= N; ++i) {
        r_bar[i] = L.map->forward(grid.node(i));
        d[i] = cs.D().value(grid.node(i), t);
    }
    for (std::size_t j = 0; j <= N; ++j) {
        for (std::size_t i = 1; i <= j; ++i) {
            if (i == j) {
                p.at(i, j, 0) = L.Q(grid.node(i)) / std::sqrt(d[i]);
                continue;
            }
            p.at(i, j, 0) = detail::lattice_interpolate(*lat, q, r_bar[i], r_bar[j], delta) / d[j];
        }
    }
    return p;
}

// p(r,r,t) from the diagonal condition, by direct quadrature of lambda.
inline double kernel_diagonal(const CoefficientSet& cs, double mu, double r, double t) {
    const double integral = quad::integrate(
        [&](double y) { return (mu - eval_lambda(cs, y, t)) / std::sqrt(cs.D().value(y, t)); },
        0.0, r, 1e-11);
    return integral / (2.0 * std::sqrt(cs.D().value(r, t)));
}

// p(r_i,r_i,t) at every grid node: Simpson on a fine uniform grid (at least
// 1000 panels) with lambda sampled by lambda_profile.
inline std::vector<double> kernel_diagonal_profile(const CoefficientSet& cs, double mu,
                                                   const SpatialGrid& grid, double t) {
    const std::size_t n = grid.cells();
    const std::size_t m = (1000 + n - 1) / n;  // panels per grid cell
    std::vector<double> fine(2 * m * n + 1);
    for (std::size_t k = 0; k < fine.size(); ++k)
        fine[k] = k + 1 == fine.size() ? 1.0 : static_cast<double>(k) / static_cast<double>(fine.size() - 1);
    const auto lam = lambda_profile(cs, fine, t);
    std::vector<double> f(fine.size());
    for (std::size_t k = 0; k < f.size(); ++k)
        f[k] = (mu - lam[k]) / std::sqrt(cs.D().value(fine[k], t));
    std::vector<double> out(n + 1, 0.0);
    const double h = 1.0 / static_cast<double>(fine.size() - 1);
    double acc = 0.0;
    for (std::size_t c = 0; c < m * n; ++c) {
        acc += h / 3.0 * (f[2 * c] + 4.0 * f[2 * c + 1] + f[2 * c + 2]);
        if ((c + 1) % m == 0) {
            const std::size_t i = (c + 1) / m;
            out[i] = acc / (2.0 * std::sqrt(cs.D().value(grid.node(i), t)));
        }
    }
    return out;
}

struct KernelResidual {
    double interior_max = 0.0;
    double interior_l2 = 0.0;
    std::size_t worst_i = 0, worst_j = 0, worst_k = 0;
    double diagonal_max = 0.0;
    double edge_max = 0.0;
};

// p_t - D(r) p_rr + (D(s) p)_ss + (mu - lambda(r)) p at interior triangle
// nodes (1 <= i, i+1 <= j <= n-1) by centered differences; the diagonal and
// edge conditions are checked against direct quadrature and zero.
inline KernelResidual kernel_residual(const KernelField& p, const CoefficientSet& cs, double mu) {
    const auto& grid = p.grid();
    const std::size_t n = grid.cells();
    const double h = grid.step();
    const std::size_t K = p.time_count();
    const bool tv = !cs.time_invariant();
    if (tv && K < 3)
        throw config_error("residual of a time-varying kernel needs at least 3 time samples");

    KernelResidual rep;
    double sum_sq = 0.0;
    std::size_t count = 0;
    const auto nodes = grid.nodes();
    std::vector<double> series(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double t = p.times()[k];
        const auto lam = lambda_profile(cs, nodes, t);
        std::vector<double> d(n + 1);
        for (std::size_t i = 0; i <= n; ++i) d[i] = cs.D().value(nodes[i], t);
        for (std::size_t i = 1; i + 1 <= n - 1; ++i) {
            for (std::size_t j = i + 1; j + 1 <= n; ++j) {
                double pt = 0.0;
                if (tv) {
                    for (std::size_t kk = 0; kk < K; ++kk) series[kk] = p(i, j, kk);
                    pt = PsiLattice::time_derivative(p.times(), series)[k];
                }
                const double prr = (p(i + 1, j, k) - 2 * p(i, j, k) + p(i - 1, j, k)) / (h * h);
                const double dpss = (d[j + 1] * p(i, j + 1, k) - 2 * d[j] * p(i, j, k) +
                                     d[j - 1] * p(i, j - 1, k)) /
                                    (h * h);
                const double res = pt - d[i] * prr + dpss + (mu - lam[i]) * p(i, j, k);
                sum_sq += res * res;
                ++count;
                if (std::abs(res) > rep.interior_max) {
                    rep.interior_max = std::abs(res);
                    rep.worst_i = i;
                    rep.worst_j = j;
                    rep.worst_k = k;
                }
            }
        }
        const auto diag = kernel_diagonal_profile(cs, mu, grid, t);
        for (std::size_t i = 0; i <= n; ++i) {
            rep.edge_max = std::max(rep.edge_max, std::abs(p(0, i, k)));
            rep.diagonal_max = std::max(rep.diagonal_max, std::abs(p(i, i, k) - diag[i]));
        }
    }
    // area-weighted L2 over the triangle and time samples
    rep.interior_l2 = count ? std::sqrt(sum_sq * h * h / static_cast<double>(K)) : 0.0;
    return rep;
}

}  // namespace pdeobs
