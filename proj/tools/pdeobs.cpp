#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "pdeobs/config.hpp"
#include "pdeobs/gains.hpp"
#include "pdeobs/io.hpp"
#include "pdeobs/kernel.hpp"
#include "pdeobs/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pdeobs;

namespace {

constexpr const char* kVersion = "1.0.0";

constexpr const char* kColumns = R"(Output files (floating point written with 17 significant digits):
  simulate      states.csv      t,r,value,label   (label: u, u_hat, c_tilde, w_tilde)
                norms.csv       t,norm_c_tilde,norm_w_tilde,W
                summary.json    config echo, mu, sigma, fit residual, kernel residual
  solve-kernel  kernel.csv      t,r,s,p           (+ p_direct,abs_diff with --oracle)
                gains_p1.csv    t,r,p1
                gains_p10.csv   t,p10
                summary.json    kernel norms, iterate count, residuals
  every command writing to --out finishes with manifest.json
Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
            3 numerical or convergence error.)";

struct Options {
    std::vector<std::string> configs;
    std::string out;
    std::string kernel_path;
    Overrides overrides;
    bool oracle = false;
};

class Stopwatch {
public:
    void run(const std::string& stage, const std::function<void()>& f) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const std::chrono::duration<double> d = std::chrono::steady_clock::now() - t0;
        timings_[stage] = d.count();
    }
    void add(const std::vector<StageTiming>& ts) {
        for (const auto& t : ts) timings_[t.stage] = t.seconds;
    }
    const json& timings() const { return timings_; }

private:
    json timings_ = json::object();
};

// Files are written into a sibling staging directory that is renamed into
// place once the manifest has been written.
class OutputDir {
public:
    explicit OutputDir(const std::string& target) : target_(fs::absolute(target)) {
        if (fs::exists(target_) && !fs::exists(target_ / "manifest.json"))
            throw config_error("output directory " + target_.string() +
                               " exists and is not a completed run; refusing to overwrite");
        staging_ = target_;
        staging_ += ".partial-" + std::to_string(::getpid());
        fs::remove_all(staging_);
        fs::create_directories(staging_);
    }
    ~OutputDir() {
        std::error_code ec;
        if (!committed_) fs::remove_all(staging_, ec);
    }

    std::string file(const std::string& name) const { return (staging_ / name).string(); }

    void commit(const json& manifest) {
        write_json(file("manifest.json"), manifest);
        if (fs::exists(target_)) fs::remove_all(target_);
        fs::rename(staging_, target_);
        committed_ = true;
    }

    const fs::path& target() const { return target_; }

private:
    fs::path target_, staging_;
    bool committed_ = false;

public:
    static void write_json(const std::string& path, const json& j) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw config_error("cannot write " + path);
        out << j.dump(2) << '\n';
    }
};

json manifest(const std::string& command, const std::string& config, const OutputDir& dir,
              const Stopwatch& sw) {
    return {{"command", command},
            {"config", config},
            {"output_directory", dir.target().string()},
            {"tool_version", kVersion},
            {"timings_seconds", sw.timings()}};
}

json residual_json(const KernelResidual& r) {
    return {{"interior_max", r.interior_max},
            {"interior_l2", r.interior_l2},
            {"diagonal_max", r.diagonal_max},
            {"edge_max", r.edge_max}};
}

json bound_json(const MuBound& b) {
    return {{"bound", b.bound}, {"max_abs_Drr", b.max_abs_Drr}, {"min_D", b.min_D}, {"D_m", b.D_m}};
}

ParsedScenario load(const std::string& path, const Options& opt) {
    ParsedScenario ps = load_scenario(path);
    apply_overrides(ps.config, opt.overrides);
    return ps;
}

double resolve_mu(const ScenarioConfig& cfg, const MuBound& b) {
    return cfg.mu ? *cfg.mu : b.bound + cfg.mu_offset;
}

int cmd_validate(const Options& opt) {
    const auto ps = load(opt.configs.front(), opt);
    const auto& cfg = ps.config;
    const SpatialGrid grid(cfg.grid_n);
    const auto kt = cfg.kernel_times();
    const auto report = validate(cfg.coefficients, grid, kt);

    json j;
    j["config"] = opt.configs.front();
    j["positive"] = report.positive;
    j["min_D"] = report.min_D;
    if (report.first_nonpositive)
        j["first_nonpositive"] = {report.first_nonpositive->first, report.first_nonpositive->second};
    j["partials"] = json::array();
    for (const auto& c : report.partials)
        j["partials"].push_back({{"field", c.field},
                                 {"max_discrepancy", c.max_discrepancy},
                                 {"tolerance", c.tolerance},
                                 {"ok", c.ok}});
    if (report.positive) {
        const auto b = mu_bound(cfg.coefficients, grid, kt);
        const double mu = resolve_mu(cfg, b);
        j["mu_bound"] = bound_json(b);
        j["mu"] = mu;
        j["mu_admissible"] = is_admissible(mu, b);
    }
    j["ok"] = report.ok();

    std::cout << "config        " << opt.configs.front() << '\n'
              << "D positive    " << (report.positive ? "yes" : "NO") << "  (min D = "
              << report.min_D << ")\n";
    if (report.first_nonpositive)
        std::cout << "  positivity violated: D(" << report.first_nonpositive->first << ", "
                  << report.first_nonpositive->second << ") <= 0\n";
    for (const auto& c : report.partials)
        if (!c.ok)
            std::cout << "  inconsistent partial " << c.field << ": discrepancy "
                      << c.max_discrepancy << " > " << c.tolerance << '\n';
    if (j.contains("mu_bound"))
        std::cout << "mu bound      " << j["mu_bound"]["bound"].get<double>() << '\n'
                  << "mu            " << j["mu"].get<double>()
                  << (j["mu_admissible"].get<bool>() ? "  (admissible)" : "  (NOT admissible)")
                  << '\n';
    std::cout << j.dump(2) << '\n';

    if (!opt.out.empty()) {
        Stopwatch sw;
        OutputDir dir(opt.out);
        OutputDir::write_json(dir.file("validate.json"), j);
        dir.commit(manifest("validate", opt.configs.front(), dir, sw));
    }
    if (!report.positive)
        throw invariant_error("validation failed: D is not positive");
    if (!report.ok()) {
        std::string fields;
        for (const auto& c : report.partials)
            if (!c.ok) fields += (fields.empty() ? "" : ", ") + c.field;
        throw config_error("validation failed: inconsistent analytic partials: " + fields);
    }
    return 0;
}

int cmd_solve_kernel(const Options& opt) {
    if (opt.out.empty()) throw config_error("solve-kernel needs --out");
    const auto ps = load(opt.configs.front(), opt);
    const auto& cfg = ps.config;
    const auto& cs = cfg.coefficients;
    const SpatialGrid grid(cfg.grid_n);
    const auto kt = cfg.kernel_times();
    Stopwatch sw;
    OutputDir dir(opt.out);

    MuBound b{};
    sw.run("mu_bound", [&] { b = mu_bound(cs, grid, kt); });
    const double mu = resolve_mu(cfg, b);
    if (!is_admissible(mu, b))
        spdlog::warn("mu = {} is not below the bound {}", mu, b.bound);

    std::optional<KernelField> p, direct;
    sw.run("kernel", [&] {
        try {
            p = solve_kernel(cs, mu, grid, kt, cfg.kernel);
        } catch (const convergence_error& e) {
            spdlog::error("kernel series did not converge: tail norm {} after {} iterates",
                          e.tail_norm, e.iterations);
            throw;
        }
    });
    spdlog::info("kernel: {} iterates, tail {}", p->iterations, p->tail_norm);
    if (opt.oracle) sw.run("oracle", [&] { direct = solve_kernel_direct(cs, mu, grid); });
    std::optional<ObserverGains> g;
    sw.run("gains", [&] { g = compute_gains(*p, cs); });
    KernelResidual res{};
    sw.run("residual", [&] { res = kernel_residual(*p, cs, mu); });

    sw.run("write", [&] {
        io::write_kernel(dir.file("kernel.csv"), *p, direct ? &*direct : nullptr);
        io::write_gains(dir.file("gains_p1.csv"), dir.file("gains_p10.csv"), *g);
        json s;
        s["config"] = ps.echo;
        s["mu"] = mu;
        s["mu_bound"] = bound_json(b);
        s["grid_n"] = grid.cells();
        s["time_samples"] = p->times();
        s["iterations"] = p->iterations;
        s["tail_norm"] = p->tail_norm;
        s["iterate_norms"] = p->iterate_norms;
        s["max_abs"] = p->max_abs();
        s["residual"] = residual_json(res);
        if (direct) {
            double diff = 0.0;
            for (std::size_t q = 0; q < p->layer(0).size(); ++q)
                diff = std::max(diff, std::abs(p->layer(0)[q] - direct->layer(0)[q]));
            s["oracle"] = {{"max_abs_diff", diff}, {"max_abs_direct", direct->max_abs()}};
        }
        OutputDir::write_json(dir.file("summary.json"), s);
    });
    dir.commit(manifest("solve-kernel", opt.configs.front(), dir, sw));
    return 0;
}

void simulate_one(const std::string& config, const std::string& out, const Options& opt) {
    const auto ps = load(config, opt);
    Stopwatch sw;
    OutputDir dir(out);
    const SimulationResult r = run_scenario(ps.config);
    sw.add(r.timings);
    for (const auto& w : r.warnings) spdlog::warn("{}: {}", config, w);

    sw.run("write", [&] {
        if (ps.output.write_states) io::write_states(dir.file("states.csv"), r.states);
        io::write_norms(dir.file("norms.csv"), r.times, r.norm_c_tilde, r.norm_w_tilde, r.W);
        json s;
        s["config"] = ps.echo;
        s["mu"] = r.mu;
        s["mu_bound"] = bound_json(r.bound);
        s["mu_admissible"] = r.mu_admissible;
        s["steps"] = r.steps;
        s["sigma"] = r.fit.sigma;
        s["fit_residual"] = r.fit.residual;
        s["converged"] = r.fit.converged;
        s["fit_samples"] = r.fit.samples;
        s["kernel_iterations"] = r.kernel.iterations;
        s["kernel_tail_norm"] = r.kernel.tail_norm;
        if (r.residual) s["kernel_residual"] = residual_json(*r.residual);
        if (!r.norm_c_tilde.empty()) {
            s["norm_c_tilde_initial"] = r.norm_c_tilde.front();
            s["norm_c_tilde_final"] = r.norm_c_tilde.back();
        }
        s["warnings"] = r.warnings;
        s["regularity"] =
            "classical-solution regularity is not certified numerically; "
            "refinement convergence of the kernel residual is reported instead";
        OutputDir::write_json(dir.file("summary.json"), s);
    });
    dir.commit(manifest("simulate", config, dir, sw));
    spdlog::info("{}: sigma = {}, fit residual = {}", config, r.fit.sigma, r.fit.residual);
}

int exit_code(const std::exception_ptr& ep) {
    try {
        std::rethrow_exception(ep);
    } catch (const config_error& e) {
        spdlog::error("configuration error: {}", e.what());
        return 2;
    } catch (const range_error& e) {
        spdlog::error("configuration error: {}", e.what());
        return 2;
    } catch (const shape_error& e) {
        spdlog::error("configuration error: {}", e.what());
        return 2;
    } catch (const numerical_error& e) {
        spdlog::error("numerical error: {}", e.what());
        return 3;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
}

int cmd_simulate(const Options& opt) {
    if (opt.out.empty()) throw config_error("simulate needs --out");
    if (opt.configs.size() == 1) {
        simulate_one(opt.configs.front(), opt.out, opt);
        return 0;
    }
    // Batch: one subdirectory per config, scenarios run concurrently.
    fs::create_directories(opt.out);
    std::vector<std::future<void>> jobs;
    for (const auto& c : opt.configs) {
        const std::string sub = (fs::path(opt.out) / fs::path(c).stem()).string();
        jobs.push_back(std::async(std::launch::async, [&opt, c, sub] { simulate_one(c, sub, opt); }));
    }
    int worst = 0;
    for (auto& j : jobs) {
        try {
            j.get();
        } catch (...) {
            worst = std::max(worst, exit_code(std::current_exception()));
        }
    }
    return worst;
}

int cmd_verify(const Options& opt) {
    if (opt.kernel_path.empty()) throw config_error("verify needs --kernel");
    const auto ps = load(opt.configs.front(), opt);
    const auto& cs = ps.config.coefficients;
    const KernelField p = io::read_kernel(opt.kernel_path);
    const auto b = mu_bound(cs, p.grid(), p.times());
    const double mu = resolve_mu(ps.config, b);
    const auto res = kernel_residual(p, cs, mu);
    json j{{"kernel", opt.kernel_path},
           {"grid_n", p.grid().cells()},
           {"time_samples", p.time_count()},
           {"mu", mu},
           {"residual", residual_json(res)}};
    std::cout << j.dump(2) << '\n';
    if (!opt.out.empty()) {
        Stopwatch sw;
        OutputDir dir(opt.out);
        OutputDir::write_json(dir.file("residual.json"), j);
        dir.commit(manifest("verify", opt.configs.front(), dir, sw));
    }
    return 0;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("pdeobs");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* lvl = std::getenv("PDEOBS_LOG"))
        spdlog::set_level(spdlog::level::from_str(lvl));
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Boundary observer for reaction-advection-diffusion PDEs"};
    app.footer(kColumns);
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Options opt;
    std::optional<std::size_t> grid_n;
    std::optional<double> tol;
    std::optional<int> max_iter;
    std::optional<std::uint64_t> seed;

    const auto common = [&](CLI::App* sub, bool needs_out, bool many) {
        auto* c = sub->add_option("--config", opt.configs, "scenario config (JSON)")->required();
        if (!many) c->expected(1);
        auto* o = sub->add_option("--out", opt.out, "output directory");
        if (needs_out) o->required();
        sub->add_option("--grid-n", grid_n, "override grid.n");
        sub->add_option("--tol", tol, "override target.tol");
        sub->add_option("--max-iter", max_iter, "override target.max_iter");
        sub->add_option("--seed", seed, "seed for random initial conditions");
    };
    auto* validate_cmd = app.add_subcommand("validate", "check coefficients and report the mu bound");
    common(validate_cmd, false, false);
    auto* kernel_cmd = app.add_subcommand("solve-kernel", "solve the kernel equations and gains");
    common(kernel_cmd, true, false);
    kernel_cmd->add_flag("--oracle", opt.oracle, "cross-check against the direct solver");
    auto* sim_cmd = app.add_subcommand("simulate", "run plant + observer; several configs run as a batch");
    common(sim_cmd, true, true);
    auto* verify_cmd = app.add_subcommand("verify", "residuals of a stored kernel CSV");
    common(verify_cmd, false, false);
    verify_cmd->add_option("--kernel", opt.kernel_path, "kernel.csv from solve-kernel")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    opt.overrides = {grid_n, tol, max_iter, seed};

    try {
        if (*validate_cmd) return cmd_validate(opt);
        if (*kernel_cmd) return cmd_solve_kernel(opt);
        if (*sim_cmd) return cmd_simulate(opt);
        if (*verify_cmd) return cmd_verify(opt);
    } catch (...) {
        return exit_code(std::current_exception());
    }
    return 1;
}
