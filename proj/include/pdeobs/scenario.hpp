#pragma once

// Closed-loop estimation runs: kernel, gains, plant + observer co-simulation
// and the recorded error diagnostics.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "coeffs.hpp"
#include "errors.hpp"
#include "gains.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "sim.hpp"
#include "xform.hpp"

namespace pdeobs {

// Initial profiles that vanish at r = 0.
struct InitialCondition {
    enum class Family { zero, poly, sine_modes, random_modes, same_as_plant };

    Family family = Family::zero;
    std::vector<double> coefficients;  // poly: a_0..a_m with a_0 = 0; sine_modes: amplitudes
    std::size_t modes = 0;             // random_modes
    double amplitude = 1.0;            // random_modes
    std::uint64_t seed = 0;            // random_modes

    static InitialCondition zero() { return {}; }
    static InitialCondition poly(std::vector<double> a) {
        InitialCondition ic;
        ic.family = Family::poly;
        ic.coefficients = std::move(a);
        return ic;
    }
    static InitialCondition sine_modes(std::vector<double> amps) {
        InitialCondition ic;
        ic.family = Family::sine_modes;
        ic.coefficients = std::move(amps);
        return ic;
    }
    static InitialCondition random_modes(std::size_t modes, double amplitude, std::uint64_t seed) {
        InitialCondition ic;
        ic.family = Family::random_modes;
        ic.modes = modes;
        ic.amplitude = amplitude;
        ic.seed = seed;
        return ic;
    }
    static InitialCondition same_as_plant() {
        InitialCondition ic;
        ic.family = Family::same_as_plant;
        return ic;
    }

    void check() const {
        if (family == Family::poly && !coefficients.empty() && coefficients.front() != 0.0)
            throw config_error("poly initial condition must vanish at r = 0 (a_0 = " +
                               std::to_string(coefficients.front()) + ")");
        if (family == Family::random_modes && modes == 0)
            throw config_error("random_modes initial condition needs modes >= 1");
        for (double a : coefficients)
            if (!std::isfinite(a)) throw config_error("non-finite initial-condition coefficient");
    }

    // Mode k is sin((k + 1/2) pi r). Random amplitudes are amplitude * U(-1,1) / (k+1),
    // drawn from the raw mt19937_64 stream so the values are identical on every platform.
    std::function<double(double)> build() const {
        check();
        switch (family) {
            case Family::zero:
            case Family::same_as_plant:
                return [](double) { return 0.0; };
            case Family::poly:
                return [a = coefficients](double r) {
                    double v = 0.0;
                    for (auto it = a.rbegin(); it != a.rend(); ++it) v = v * r + *it;
                    return v;
                };
            case Family::sine_modes:
                return sine_series(coefficients);
            case Family::random_modes: {
                std::mt19937_64 rng(seed);
                std::vector<double> amps(modes);
                for (std::size_t k = 0; k < modes; ++k) {
                    const double u01 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                    amps[k] = amplitude * (2.0 * u01 - 1.0) / static_cast<double>(k + 1);
                }
                return sine_series(std::move(amps));
            }
        }
        throw config_error("unknown initial-condition family");
    }

private:
    static std::function<double(double)> sine_series(std::vector<double> amps) {
        return [a = std::move(amps)](double r) {
            double v = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k)
                v += a[k] * std::sin((static_cast<double>(k) + 0.5) * std::numbers::pi * r);
            return v;
        };
    }
};

enum class PlantModel { transformed, original };

struct ScenarioConfig {
    explicit ScenarioConfig(CoefficientSet cs) : coefficients(std::move(cs)) {}

    CoefficientSet coefficients;
    std::optional<double> mu;       // explicit target reaction coefficient
    double mu_offset = -1.0;        // otherwise mu = mu_bound + mu_offset
    std::size_t grid_n = 100;
    double dt = 1e-4;
    std::size_t kernel_time_samples = 21;  // used only for time-varying coefficients
    KernelOptions kernel;
    InitialCondition plant_ic;     // u_0 in plant coordinates
    InitialCondition observer_ic;  // c_hat_0 in gauge coordinates
    PlantModel plant_model = PlantModel::transformed;
    std::size_t norm_every = 0;    // 0: about 1000 records over the horizon
    std::size_t state_every = 0;   // 0: about 20 snapshots over the horizon
    bool attach_residual = true;

    double horizon() const { return coefficients.horizon(); }

    std::size_t steps() const {
        const double k = horizon() / dt;
        const auto m = static_cast<std::size_t>(std::llround(k));
        if (m == 0 || std::abs(k - static_cast<double>(m)) > 1e-6)
            throw config_error("horizon T = " + std::to_string(horizon()) +
                               " is not a whole number of steps dt = " + std::to_string(dt));
        return m;
    }

    void check() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw config_error("dt must be positive");
        if (grid_n < 5) throw config_error("grid n must be at least 5");
        if (kernel_time_samples < 3 && !coefficients.time_invariant())
            throw config_error("time-varying coefficients need at least 3 kernel time samples");
        if (mu && !std::isfinite(*mu)) throw config_error("mu must be finite");
        if (plant_ic.family == InitialCondition::Family::same_as_plant)
            throw config_error("plant initial condition cannot be same_as_plant");
        plant_ic.check();
        observer_ic.check();
        (void)steps();
    }

    std::vector<double> kernel_times() const {
        if (coefficients.time_invariant()) return {0.0};
        return uniform_times(horizon(), kernel_time_samples);
    }
};

struct StageTiming {
    std::string stage;
    double seconds;
};

struct SimulationResult {
    SimulationResult(KernelField p, ObserverGains g) : kernel(std::move(p)), gains(std::move(g)) {}

    double mu = 0.0;
    MuBound bound{};
    bool mu_admissible = true;
    std::size_t steps = 0;
    std::vector<double> times;
    std::vector<double> norm_c_tilde;
    std::vector<double> norm_w_tilde;
    std::vector<double> W;
    std::vector<StateField> states;
    DecayFit fit;
    KernelField kernel;
    ObserverGains gains;
    std::optional<KernelResidual> residual;
    std::vector<std::string> warnings;
    std::vector<StageTiming> timings;
};

namespace detail {

// Runs f and rethrows any library error with the stage name prefixed,
// preserving its type.
template <class F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
    const auto tag = [&](const std::exception& e) { return "[" + stage + "] " + e.what(); };
    try {
        return f();
    } catch (const convergence_error& e) {
        throw convergence_error(tag(e), e.tail_norm, e.iterations);
    } catch (const resolution_error& e) {
        throw resolution_error(tag(e));
    } catch (const numerical_error& e) {
        throw numerical_error(tag(e));
    } catch (const invariant_error& e) {
        throw invariant_error(tag(e));
    } catch (const config_error& e) {
        throw config_error(tag(e));
    } catch (const range_error& e) {
        throw range_error(tag(e));
    } catch (const shape_error& e) {
        throw shape_error(tag(e));
    }
}

class StageClock {
public:
    explicit StageClock(std::vector<StageTiming>& out) : out_(out) {}
    template <class F>
    auto run(const std::string& stage, F&& f) -> decltype(f()) {
        const auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(f())>) {
            staged(stage, std::forward<F>(f));
            record(stage, t0);
        } else {
            auto r = staged(stage, std::forward<F>(f));
            record(stage, t0);
            return r;
        }
    }

private:
    void record(const std::string& stage, std::chrono::steady_clock::time_point t0) {
        const std::chrono::duration<double> d = std::chrono::steady_clock::now() - t0;
        out_.push_back({stage, d.count()});
    }
    std::vector<StageTiming>& out_;
};

inline std::size_t auto_stride(std::size_t requested, std::size_t steps, std::size_t target) {
    if (requested > 0) return requested;
    return std::max<std::size_t>(1, steps / target);
}

}  // namespace detail

inline SimulationResult run_scenario(const ScenarioConfig& cfg) {
    std::vector<StageTiming> timings;
    detail::StageClock clock(timings);
    const CoefficientSet& cs = cfg.coefficients;

    clock.run("config", [&] { cfg.check(); });
    const SpatialGrid grid(cfg.grid_n);
    const auto kt = cfg.kernel_times();
    const std::size_t steps = cfg.steps();

    const MuBound bound = clock.run("validate", [&] {
        const auto report = validate(cs, grid, kt);
        if (!report.positive)
            throw invariant_error("D is not positive at (r, t) = (" +
                                  std::to_string(report.first_nonpositive->first) + ", " +
                                  std::to_string(report.first_nonpositive->second) + ")");
        for (const auto& c : report.partials)
            if (!c.ok)
                throw config_error("analytic partial of " + c.field +
                                   " disagrees with finite differences by " +
                                   std::to_string(c.max_discrepancy));
        return mu_bound(cs, grid, kt);
    });
    const double mu = cfg.mu ? *cfg.mu : bound.bound + cfg.mu_offset;

    KernelField p = clock.run("kernel", [&] { return solve_kernel(cs, mu, grid, kt, cfg.kernel); });
    ObserverGains g = clock.run("gains", [&] { return compute_gains(p, cs); });

    SimulationResult res(std::move(p), std::move(g));
    res.mu = mu;
    res.bound = bound;
    res.mu_admissible = is_admissible(mu, bound);
    res.steps = steps;
    if (!res.mu_admissible)
        res.warnings.push_back("mu = " + std::to_string(mu) + " is not below the bound " +
                               std::to_string(bound.bound) + "; decay is not guaranteed");
    if (cfg.attach_residual)
        res.residual = clock.run("residual", [&] { return kernel_residual(res.kernel, cs, mu); });

    clock.run("simulate", [&] {
        CoefficientSampler smp(cs, grid);
        const auto u0 = StateField::sample(grid, cfg.plant_ic.build(), 0.0, StateLabel::u);
        StateField u = u0;
        StateField c = gauge_forward(u0, cs);
        StateField c_hat =
            cfg.observer_ic.family == InitialCondition::Family::same_as_plant
                ? StateField(grid, c.values, 0.0, StateLabel::c_hat)
                : StateField::sample(grid, cfg.observer_ic.build(), 0.0, StateLabel::c_hat);
        const bool original = cfg.plant_model == PlantModel::original;

        const std::size_t norm_every = detail::auto_stride(cfg.norm_every, steps, 1000);
        const std::size_t state_every = detail::auto_stride(cfg.state_every, steps, 20);

        const auto record = [&](std::size_t k) {
            const bool want_norm = k % norm_every == 0 || k == steps;
            const bool want_state = k % state_every == 0 || k == steps;
            if (!want_norm && !want_state) return;
            if (original) c = gauge_forward(u, cs);
            std::vector<double> e(c.values);
            for (std::size_t i = 0; i < e.size(); ++i) e[i] -= c_hat.values[i];
            const StateField ct(grid, std::move(e), c.time, StateLabel::c_tilde);
            const StateField wt = volterra_invert(res.kernel, ct);
            if (want_norm) {
                const double nw = l2_norm(wt);
                res.times.push_back(c.time);
                res.norm_c_tilde.push_back(l2_norm(ct));
                res.norm_w_tilde.push_back(nw);
                res.W.push_back(0.5 * nw * nw);
            }
            if (want_state) {
                StateField uu = original ? u : gauge_inverse(c, cs);
                StateField uh = gauge_inverse(c_hat, cs);
                uh.label = StateLabel::u_hat;
                res.states.push_back(std::move(uu));
                res.states.push_back(std::move(uh));
                res.states.push_back(ct);
                res.states.push_back(wt);
            }
        };

        record(0);
        for (std::size_t k = 0; k < steps; ++k) {
            const double t = static_cast<double>(k) * cfg.dt;
            c.time = u.time = c_hat.time = t;
            const double y = original ? u.values.back() * std::exp(smp.at(t).gauge_exponent)
                                      : c.values.back();
            c_hat = step_observer(c_hat, smp, res.gains, y, cfg.dt);
            if (original) {
                u = step_plant(u, smp, cfg.dt);
                c.time = u.time;
            } else {
                c = step_transformed_plant(c, smp, cfg.dt);
            }
            record(k + 1);
        }
    });

    if (res.times.size() >= 10) {
        res.fit = fit_decay(res.times, res.norm_c_tilde);
    } else {
        res.warnings.push_back("fewer than 10 norm records; decay rate not fitted");
    }
    res.timings = std::move(timings);
    return res;
}

}  // namespace pdeobs
