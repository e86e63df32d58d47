#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pdeobs/xform.hpp"

using namespace pdeobs;

namespace {

CoefficientSet make(Field D, Field b, double T = 1.0) {
    return {std::move(D), std::move(b), Field::constant(0.0), Signal::constant(0.0), T};
}

StateField random_field(const SpatialGrid& g, std::mt19937_64& rng, StateLabel label) {
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> v(g.size());
    for (auto& x : v) x = u(rng);
    v[0] = 0.0;
    return {g, std::move(v), 0.0, label};
}

KernelField fill(const SpatialGrid& g, const std::function<double(double, double)>& f) {
    KernelField p(g, {0.0});
    for (std::size_t j = 0; j < g.size(); ++j)
        for (std::size_t i = 0; i <= j; ++i) p.at(i, j, 0) = f(g.node(i), g.node(j));
    return p;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST(SpatialGrid, Nodes) {
    const SpatialGrid g(8);
    EXPECT_EQ(g.size(), 9u);
    EXPECT_EQ(g.node(0), 0.0);
    EXPECT_EQ(g.node(8), 1.0);
    const auto x = g.nodes();
    for (std::size_t i = 1; i < x.size(); ++i) EXPECT_GT(x[i], x[i - 1]);
    EXPECT_THROW(SpatialGrid(1), config_error);
}

TEST(StateField, Invariants) {
    const SpatialGrid g(4);
    EXPECT_THROW(StateField(g, std::vector<double>(3, 0.0), 0.0, StateLabel::u), shape_error);
    EXPECT_THROW(StateField(g, {0, 1, NAN, 0, 0}, 0.0, StateLabel::u), numerical_error);
    EXPECT_EQ(to_string(StateLabel::c_tilde), "c_tilde");
}

TEST(Gauge, NoAdvectionIsIdentity) {
    const auto cs = make(Field::poly_r({1, 0.5}), Field::constant(0));
    std::mt19937_64 rng(1);
    const auto u = random_field(SpatialGrid(30), rng, StateLabel::u);
    const auto c = gauge_forward(u, cs);
    EXPECT_EQ(c.values, u.values);
    EXPECT_EQ(c.label, StateLabel::c);
    EXPECT_EQ(gauge_inverse(c, cs).values, u.values);
}

TEST(Gauge, ConstantAdvectionGivesExponential) {
    const auto cs = make(Field::constant(1), Field::constant(2));
    const SpatialGrid g(50);
    const auto u = StateField::sample(g, [](double) { return 1.0; }, 0.0, StateLabel::u);
    const auto c = gauge_forward(u, cs);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(c[i], std::exp(g.node(i)), 1e-12);
    EXPECT_NEAR(c.values.back(), 2.718281828459045, 1e-12);
    const auto back = gauge_inverse(
        StateField::sample(g, [](double r) { return std::exp(r); }, 0.0, StateLabel::c), cs);
    for (double v : back.values) EXPECT_NEAR(v, 1.0, 1e-12);
    EXPECT_EQ(back.label, StateLabel::u);
}

TEST(Gauge, RoundTripRandomFields) {
    const SpatialGrid g(200);
    for (int seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-1, 1);
        const auto cs = make(Field::poly_r({1.2 + u(rng) * 0.5, 0.3 * u(rng)}),
                             Field::separable(u(rng), u(rng), 2 * u(rng), u(rng), u(rng), u(rng)));
        const auto f = random_field(g, rng, StateLabel::u);
        EXPECT_LE(max_diff(gauge_inverse(gauge_forward(f, cs), cs).values, f.values), 1e-12) << seed;
        EXPECT_LE(max_diff(gauge_forward(gauge_inverse(f, cs), cs).values, f.values), 1e-12) << seed;
    }
}

TEST(PhiMap, UnitDiffusionIsIdentity) {
    const auto cs = make(Field::constant(1), Field::constant(0));
    for (double r : {0.0, 0.25, 0.5, 1.0}) {
        EXPECT_NEAR(phi_map(r, 0.0, cs), r, 1e-14);
        EXPECT_NEAR(phi_inverse(r, 0.0, cs), r, 1e-12);
    }
}

TEST(PhiMap, QuadraticDiffusionGivesLog) {
    const auto cs = make(Field::poly_r({1, 2, 1}), Field::constant(0));
    EXPECT_NEAR(phi_map(1.0, 0.3, cs), std::log(2.0), 1e-12);
    EXPECT_NEAR(phi_inverse(std::log(2.0), 0.3, cs), 1.0, 1e-12);
    EXPECT_NEAR(phi_map(0.5, 0.0, cs), std::log(1.5), 1e-12);
}

TEST(PhiMap, RoundTripRandomPoints) {
    const auto cs = make(Field::separable(1.0, 0.4, 3.0, 0.2, 1.0, 0.0), Field::constant(0));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 100; ++k) {
        const double r = u(rng), t = u(rng);
        EXPECT_NEAR(phi_inverse(phi_map(r, t, cs), t, cs), r, 1e-10);
        const double rb = u(rng) * phi_map(1.0, t, cs);
        EXPECT_LT(std::abs(phi_map(phi_inverse(rb, t, cs), t, cs) - rb), 1e-12);
    }
}

TEST(PhiMap, StrictlyMonotone) {
    const auto cs = make(Field::separable(1.0, 0.5, 5.0, 0.0, 2.0, 0.0), Field::constant(0));
    for (double t : {0.0, 0.4, 0.9}) {
        double prev = phi_map(0.0, t, cs);
        EXPECT_EQ(prev, 0.0);
        for (int i = 1; i <= 50; ++i) {
            const double v = phi_map(i / 50.0, t, cs);
            EXPECT_GT(v, prev);
            prev = v;
        }
    }
}

TEST(PhiMap, InverseRejectsOutOfRange) {
    const auto cs = make(Field::poly_r({1, 2, 1}), Field::constant(0));
    EXPECT_THROW(phi_inverse(0.7, 0.0, cs), range_error);
    EXPECT_THROW(phi_inverse(-0.1, 0.0, cs), range_error);
}

TEST(CoordinateMap, MatchesPointwiseMap) {
    const auto cs = make(Field::poly_r({1, 2, 1}), Field::constant(0));
    const CoordinateMap m(cs, 0.0, 400);
    EXPECT_NEAR(m.bar_length(), std::log(2.0), 1e-13);
    for (double r : {0.0, 0.13, 0.5, 0.77, 1.0}) {
        EXPECT_NEAR(m.forward(r), std::log(1 + r), 1e-12);
        EXPECT_NEAR(m.inverse(std::log(1 + r)), r, 1e-11);
        EXPECT_NEAR(m.slope(r), 1 / (1 + r), 1e-12);
    }
}

TEST(CoordinateMap, TimeInvariantTablesCoincide) {
    const auto cs = make(Field::poly_r({1, 0.3, -0.2}), Field::constant(0), 2.0);
    const CoordinateMap a(cs, 0.0, 300), b(cs, 1.7, 300);
    EXPECT_EQ(a.bar_samples(), b.bar_samples());
    EXPECT_EQ(a.r_samples(), b.r_samples());
}

TEST(Volterra, ZeroKernelIsIdentity) {
    const SpatialGrid g(40);
    std::mt19937_64 rng(5);
    const auto w = random_field(g, rng, StateLabel::w_tilde);
    const KernelField p(g, {0.0});
    EXPECT_EQ(volterra_apply(p, w).values, w.values);
    EXPECT_EQ(volterra_invert(p, w).values, w.values);
}

TEST(Volterra, UnitKernelUnitField) {
    const SpatialGrid g(40);
    const auto p = fill(g, [](double, double) { return 1.0; });
    const auto w = StateField::sample(g, [](double) { return 1.0; }, 0.0, StateLabel::w_tilde);
    const auto c = volterra_apply(p, w);
    EXPECT_EQ(c.label, StateLabel::c_tilde);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(c[i], g.node(i), 1e-14);
    EXPECT_NEAR(c[0], 0.0, 1e-14);
    EXPECT_EQ(c.values.back(), 1.0);
    const auto analytic = StateField::sample(g, [](double r) { return r; }, 0.0, StateLabel::c_tilde);
    for (double v : volterra_invert(p, analytic).values) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Volterra, ProductKernelSecondOrder) {
    // p = r s, w = s: c(r) = r - r (1 - r^3) / 3
    double prev = 0;
    for (std::size_t n : {50, 100, 200}) {
        const SpatialGrid g(n);
        const auto p = fill(g, [](double r, double s) { return r * s; });
        const auto w = StateField::sample(g, [](double s) { return s; }, 0.0, StateLabel::w_tilde);
        const auto c = volterra_apply(p, w);
        double err = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double r = g.node(i);
            err = std::max(err, std::abs(c[i] - (r - r * (1 - r * r * r) / 3)));
        }
        EXPECT_LT(err, 2.0 / double(n * n));
        if (prev > 0) EXPECT_NEAR(prev / err, 4.0, 0.2);
        prev = err;
    }
}

TEST(Volterra, RoundTripRandom) {
    const SpatialGrid g(200);
    for (int seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-2, 2);
        const double a = u(rng), b = u(rng), c = u(rng);
        const auto p = fill(g, [&](double r, double s) { return a + b * r * s + c * std::sin(3 * s); });
        const auto w = random_field(g, rng, StateLabel::w_tilde);
        EXPECT_LE(max_diff(volterra_invert(p, volterra_apply(p, w)).values, w.values), 1e-9) << seed;
        const auto ct = random_field(g, rng, StateLabel::c_tilde);
        EXPECT_LE(max_diff(volterra_apply(p, volterra_invert(p, ct)).values, ct.values), 1e-10) << seed;
    }
}

TEST(Volterra, Linear) {
    const SpatialGrid g(60);
    std::mt19937_64 rng(9);
    const auto p = fill(g, [](double r, double s) { return std::cos(r + 2 * s); });
    const auto w1 = random_field(g, rng, StateLabel::w_tilde);
    const auto w2 = random_field(g, rng, StateLabel::w_tilde);
    const double a = 1.7, b = -0.4;
    std::vector<double> mix(g.size());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * w1[i] + b * w2[i];
    const auto lhs = volterra_apply(p, StateField(g, mix, 0.0, StateLabel::w_tilde));
    const auto c1 = volterra_apply(p, w1), c2 = volterra_apply(p, w2);
    for (std::size_t i = 0; i < mix.size(); ++i) EXPECT_NEAR(lhs[i], a * c1[i] + b * c2[i], 1e-12);
}

TEST(Volterra, ShapeAndSingularity) {
    const KernelField p(SpatialGrid(10), {0.0});
    const auto w = StateField::zeros(SpatialGrid(12), 0.0, StateLabel::w_tilde);
    EXPECT_THROW(volterra_apply(p, w), shape_error);
    EXPECT_THROW(volterra_invert(p, w), shape_error);
    // diagonal weight 1 - h/2 p(r,r) vanishes for p = 2/h
    const SpatialGrid g(10);
    const auto q = fill(g, [](double, double) { return 20.0; });
    EXPECT_THROW(volterra_invert(q, StateField::zeros(g, 0.0, StateLabel::c_tilde)), numerical_error);
}

TEST(KernelField, TimeInterpolationAndRange) {
    const SpatialGrid g(4);
    KernelField p(g, {0.0, 1.0});
    p.at(1, 2, 0) = 1.0;
    p.at(1, 2, 1) = 3.0;
    EXPECT_DOUBLE_EQ(p.slice(0.25)[KernelField::index(1, 2)], 1.5);
    EXPECT_THROW(p.slice(1.5), shape_error);
    EXPECT_THROW(p.at(3, 2, 0), range_error);
    EXPECT_THROW(KernelField(g, {0.0, 0.0}), shape_error);
}
