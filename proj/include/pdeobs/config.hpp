#pragma once

// Scenario configuration files: a flat JSON document with the sections
// coefficients, target, grid, time, initial_conditions and output.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "coeffs.hpp"
#include "errors.hpp"
#include "scenario.hpp"

namespace pdeobs {

struct OutputOptions {
    std::size_t norm_every = 0;
    std::size_t state_every = 0;
    bool write_states = true;
};

struct ParsedScenario {
    ScenarioConfig config;
    OutputOptions output;
    nlohmann::json echo;
};

// Command-line overrides applied after parsing.
struct Overrides {
    std::optional<std::size_t> grid_n;
    std::optional<double> tol;
    std::optional<int> max_iter;
    std::optional<std::uint64_t> seed;
};

namespace detail {

using nlohmann::json;

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("expected an object");
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw config_error(path_.empty() ? msg : path_ + ": " + msg);
    }

    void allow(std::initializer_list<const char*> keys) const {
        const std::set<std::string> ok(keys.begin(), keys.end());
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!ok.count(it.key())) Reader::at(path_, it.key()).fail_unknown();
    }

    bool has(const char* key) const { return j_.contains(key); }

    Reader child(const char* key) const {
        if (!has(key)) at(path_, key).fail("missing section");
        return Reader(j_.at(key), join(key));
    }

    double number(const char* key) const {
        const json& v = get(key);
        if (!v.is_number()) at(path_, key).fail("expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) at(path_, key).fail("must be finite");
        return x;
    }
    double number(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

    std::size_t count(const char* key, std::size_t fallback) const {
        if (!has(key)) return fallback;
        const json& v = get(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            at(path_, key).fail("expected a non-negative integer");
        return v.get<std::size_t>();
    }

    bool flag(const char* key, bool fallback) const {
        if (!has(key)) return fallback;
        if (!get(key).is_boolean()) at(path_, key).fail("expected true or false");
        return get(key).get<bool>();
    }

    std::string text(const char* key) const {
        const json& v = get(key);
        if (!v.is_string()) at(path_, key).fail("expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const char* key) const {
        const json& v = get(key);
        if (!v.is_array() || v.empty()) at(path_, key).fail("expected a non-empty array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) at(path_, key).fail("expected a non-empty array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    const std::string& path() const { return path_; }

private:
    struct Key {
        std::string path;
        [[noreturn]] void fail(const std::string& msg) const { throw config_error(path + ": " + msg); }
        [[noreturn]] void fail_unknown() const { fail("unknown field"); }
    };
    static Key at(const std::string& base, const std::string& key) {
        return {base.empty() ? key : base + "." + key};
    }
    std::string join(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
    const json& get(const char* key) const {
        if (!has(key)) at(path_, key).fail("missing field");
        return j_.at(key);
    }

    const json& j_;
    std::string path_;
};

inline Field parse_field(const Reader& r) {
    const std::string family = r.text("family");
    Field f = Field::constant(0.0);
    if (family == "constant") {
        r.allow({"family", "value", "override"});
        f = Field::constant(r.number("value"));
    } else if (family == "poly_r") {
        r.allow({"family", "coefficients", "override"});
        f = Field::poly_r(r.numbers("coefficients"));
    } else if (family == "separable") {
        r.allow({"family", "base", "amplitude", "kr", "pr", "kt", "pt", "override"});
        f = Field::separable(r.number("base"), r.number("amplitude"), r.number("kr", 0.0),
                             r.number("pr", 0.0), r.number("kt", 0.0), r.number("pt", 0.0));
    } else {
        r.fail("unknown family '" + family + "' (constant, poly_r, separable)");
    }
    if (r.has("override")) {
        const Reader o = r.child("override");
        o.allow({"partial", "value"});
        const std::string which = o.text("partial");
        Partial p;
        if (which == "r") p = Partial::r;
        else if (which == "rr") p = Partial::rr;
        else if (which == "t") p = Partial::t;
        else if (which == "rt") p = Partial::rt;
        else o.fail("partial must be one of r, rr, t, rt");
        f = f.with_partial(p, o.number("value"));
    }
    return f;
}

inline Signal parse_signal(const Reader& r) {
    const std::string family = r.text("family");
    if (family == "constant") {
        r.allow({"family", "value"});
        return Signal::constant(r.number("value"));
    }
    if (family == "sine") {
        r.allow({"family", "amplitude", "omega", "phase"});
        return Signal::sine(r.number("amplitude"), r.number("omega"), r.number("phase", 0.0));
    }
    r.fail("unknown family '" + family + "' (constant, sine)");
}

inline InitialCondition parse_ic(const Reader& r) {
    const std::string family = r.text("family");
    InitialCondition ic;
    if (family == "zero") {
        r.allow({"family"});
    } else if (family == "poly") {
        r.allow({"family", "coefficients"});
        ic = InitialCondition::poly(r.numbers("coefficients"));
    } else if (family == "sine_modes") {
        r.allow({"family", "amplitudes"});
        ic = InitialCondition::sine_modes(r.numbers("amplitudes"));
    } else if (family == "random_modes") {
        r.allow({"family", "modes", "amplitude", "seed"});
        ic = InitialCondition::random_modes(r.count("modes", 8), r.number("amplitude", 1.0),
                                            r.count("seed", 0));
    } else if (family == "same_as_plant") {
        r.allow({"family"});
        ic = InitialCondition::same_as_plant();
    } else {
        r.fail("unknown family '" + family +
               "' (zero, poly, sine_modes, random_modes, same_as_plant)");
    }
    try {
        ic.check();
    } catch (const config_error& e) {
        r.fail(e.what());
    }
    return ic;
}

}  // namespace detail

inline ParsedScenario parse_scenario(const nlohmann::json& doc) {
    const detail::Reader root(doc, "");
    root.allow({"coefficients", "target", "grid", "time", "initial_conditions", "output"});

    const auto co = root.child("coefficients");
    co.allow({"D", "b", "phi_rxn", "U", "plant_model"});
    const auto tm = root.child("time");
    tm.allow({"T", "dt", "kernel_samples"});
    const double T = tm.number("T");
    if (!(T > 0.0)) tm.fail("T must be positive");

    ScenarioConfig cfg(CoefficientSet(detail::parse_field(co.child("D")),
                                      detail::parse_field(co.child("b")),
                                      detail::parse_field(co.child("phi_rxn")),
                                      detail::parse_signal(co.child("U")), T));
    if (co.has("plant_model")) {
        const std::string m = co.text("plant_model");
        if (m == "transformed") cfg.plant_model = PlantModel::transformed;
        else if (m == "original") cfg.plant_model = PlantModel::original;
        else co.fail("plant_model must be 'transformed' or 'original'");
    }

    cfg.dt = tm.number("dt");
    if (!(cfg.dt > 0.0)) tm.fail("dt must be positive");
    cfg.kernel_time_samples = tm.count("kernel_samples", cfg.kernel_time_samples);

    const auto tg = root.child("target");
    tg.allow({"mu", "mu_offset", "tol", "max_iter"});
    if (tg.has("mu") && tg.has("mu_offset")) tg.fail("give either mu or mu_offset, not both");
    if (tg.has("mu")) cfg.mu = tg.number("mu");
    cfg.mu_offset = tg.number("mu_offset", cfg.mu_offset);
    cfg.kernel.tol = tg.number("tol", cfg.kernel.tol);
    cfg.kernel.max_iter = static_cast<int>(tg.count("max_iter", cfg.kernel.max_iter));
    if (!(cfg.kernel.tol > 0.0)) tg.fail("tol must be positive");

    const auto gr = root.child("grid");
    gr.allow({"n"});
    cfg.grid_n = gr.count("n", cfg.grid_n);

    const auto ic = root.child("initial_conditions");
    ic.allow({"plant", "observer"});
    cfg.plant_ic = detail::parse_ic(ic.child("plant"));
    cfg.observer_ic = detail::parse_ic(ic.child("observer"));

    OutputOptions out;
    if (root.has("output")) {
        const auto o = root.child("output");
        o.allow({"norm_every", "state_every", "states", "residual"});
        out.norm_every = o.count("norm_every", 0);
        out.state_every = o.count("state_every", 0);
        out.write_states = o.flag("states", true);
        cfg.attach_residual = o.flag("residual", true);
    }
    cfg.norm_every = out.norm_every;
    cfg.state_every = out.state_every;
    return {std::move(cfg), out, doc};
}

inline ParsedScenario parse_scenario_text(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(std::string("malformed JSON: ") + e.what());
    }
    return parse_scenario(doc);
}

inline ParsedScenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_scenario_text(ss.str());
    } catch (const config_error& e) {
        throw config_error(path + ": " + e.what());
    }
}

inline void apply_overrides(ScenarioConfig& cfg, const Overrides& o) {
    if (o.grid_n) cfg.grid_n = *o.grid_n;
    if (o.tol) cfg.kernel.tol = *o.tol;
    if (o.max_iter) cfg.kernel.max_iter = *o.max_iter;
    if (o.seed) {
        cfg.plant_ic.seed = *o.seed;
        cfg.observer_ic.seed = *o.seed + 1;
    }
}

}  // namespace pdeobs
