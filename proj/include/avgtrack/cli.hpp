#pragma once

// The gains / run / compare commands and the file formats they emit.

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "avgtrack/config.hpp"
#include "avgtrack/engine.hpp"
#include "avgtrack/error.hpp"

namespace avgtrack {

/// Process exit codes.
enum ExitCode : int { exit_ok = 0, exit_schema = 1, exit_design = 2, exit_numerical = 3 };

inline int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::input:
        case ErrorKind::io: return exit_schema;
        case ErrorKind::design: return exit_design;
        case ErrorKind::convergence:
        case ErrorKind::numerical: return exit_numerical;
    }
    return exit_schema;
}

namespace detail {

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::string fmt_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::filesystem::path ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create output directory " + dir + ": " + ec.message());
    return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out << text;
    if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace detail

/// Gain report: design quantities, adaptive feasibility and the Ω radii.
inline json gains_report(const Config& c) {
    const GainSet g = design_from_config(c);
    const Topology topo(c.vertices, c.edges);
    const auto ap = adaptive_from_config(c, g);

    json rep;
    rep["P"] = detail::matrix_json(g.P);
    rep["K"] = detail::matrix_json(g.K);
    rep["Gamma"] = detail::matrix_json(g.Gamma);
    rep["lambda2"] = g.lambda2;
    rep["f0"] = g.f0;
    rep["c1"] = g.c1;
    rep["c2"] = g.c2;
    rep["gamma"] = g.gamma_rate;
    rep["eps"] = g.eps;
    rep["phi"] = g.phi;
    rep["rho"] = ap ? json(ap->rho) : json(nullptr);
    rep["feasible"] = ap ? json(ap->feasible) : json(nullptr);
    rep["omega0"] = omega0_radius(g, topo);
    rep["omega1_level"] = ap ? json(omega1_level(g, *ap, topo)) : json(nullptr);
    rep["omega2"] = ap && ap->feasible ? json(omega2_radius(g, *ap, topo)) : json(nullptr);
    return rep;
}

/// Trace CSV: t, x, r, ξ, u, V₁ [, V₂, α_e, β_e], clocks; one row per sample.
inline void write_trace_csv(const Trace& trace, const Scenario& sc, std::ostream& out) {
    const std::size_t agents = sc.topology.vertex_count();
    const std::size_t n = sc.plant.state_dim();
    const std::size_t p = sc.plant.input_dim();
    const bool adaptive = sc.controller == ControllerKind::adaptive;

    std::string line = "t";
    for (const char* block : {"x", "r", "xi"})
        for (std::size_t i = 0; i < agents; ++i)
            for (std::size_t k = 0; k < n; ++k) line += "," + std::string(block) + "_" + std::to_string(i) + "_" + std::to_string(k);
    for (std::size_t i = 0; i < agents; ++i)
        for (std::size_t k = 0; k < p; ++k) line += ",u_" + std::to_string(i) + "_" + std::to_string(k);
    line += ",V1";
    if (adaptive) {
        line += ",V2";
        for (std::size_t e = 0; e < sc.topology.edge_count(); ++e) line += ",alpha_" + std::to_string(e);
        for (std::size_t e = 0; e < sc.topology.edge_count(); ++e) line += ",beta_" + std::to_string(e);
    }
    for (std::size_t i = 0; i < agents; ++i) line += ",clock_" + std::to_string(i);
    out << line << '\n';

    for (const auto& s : trace.samples) {
        line = detail::fmt_number(s.time());
        const Mat x = s.state.x_all();
        const Mat r = s.state.r_all();
        for (const Mat* m : {&x, &r, &s.xi})
            for (double v : m->data()) line += "," + detail::fmt_number(v);
        for (double v : s.u.data()) line += "," + detail::fmt_number(v);
        line += "," + detail::fmt_number(s.v1);
        if (adaptive) {
            line += "," + detail::fmt_number(s.v2.value_or(0.0));
            for (double v : s.state.alpha()) line += "," + detail::fmt_number(v);
            for (double v : s.state.beta()) line += "," + detail::fmt_number(v);
        }
        for (double v : s.state.clocks()) line += "," + detail::fmt_number(v);
        out << line << '\n';
    }
}

/// Final errors, bounds, total variation and clock settling for a finished run.
inline json run_summary(const Trace& trace, const Scenario& sc) {
    const auto& first = trace.samples.front();
    const auto& last = trace.samples.back();
    json s;
    s["samples"] = trace.samples.size();
    s["final_time"] = last.time();
    s["initial_xi_norm"] = first.xi_norm;
    s["final_xi_norm"] = last.xi_norm;
    s["final_tracking_norm"] = last.tracking_norm;

    double max_cons = 0.0;
    for (const auto& x : trace.samples) max_cons = std::max(max_cons, x.conservation);
    s["max_conservation_error"] = max_cons;

    s["omega0"] = omega0_radius(sc.gains, sc.topology);
    s["omega2"] = nullptr;
    s["omega1_level"] = nullptr;
    if (sc.adaptive) {
        s["omega1_level"] = omega1_level(sc.gains, *sc.adaptive, sc.topology);
        if (sc.adaptive->feasible) s["omega2"] = omega2_radius(sc.gains, *sc.adaptive, sc.topology);
        double v2_max = 0.0;
        double a_min = std::numeric_limits<double>::infinity();
        double b_min = a_min;
        for (const auto& x : trace.samples) {
            v2_max = std::max(v2_max, x.v2.value_or(0.0));
            for (double a : x.state.alpha()) a_min = std::min(a_min, a);
            for (double b : x.state.beta()) b_min = std::min(b_min, b);
        }
        s["initial_v2"] = first.v2.value_or(0.0);
        s["max_v2"] = v2_max;
        s["min_alpha"] = a_min;
        s["min_beta"] = b_min;
    }
    if (sc.controller == ControllerKind::static_gain) {
        const auto dc = decay_check(trace, sc.gains, sc.topology);
        s["decay_check"] = {{"checked", dc.checked}, {"violations", dc.violations}, {"fraction", dc.fraction}};
    }

    const auto tv = total_variation(trace);
    s["total_variation"] = tv.total;
    s["total_variation_per_agent"] = tv.per_agent;

    if (trace.sync) {
        s["clock_sync"] = {{"settling_time", detail::optional_json(trace.sync->settling_time)},
                           {"final_spread", trace.sync->final_spread}};
    } else {
        s["clock_sync"] = nullptr;
    }
    return s;
}

struct RunOptions {
    std::optional<double> horizon;
    std::optional<double> step;
    std::optional<std::string> out_dir;
};

inline Config apply_overrides(Config c, const RunOptions& opt) {
    if (opt.horizon) {
        if (!(*opt.horizon >= 0.0) || !std::isfinite(*opt.horizon)) fail(ErrorKind::input, "--horizon must be a finite value >= 0");
        c.integrator.horizon = *opt.horizon;
    }
    if (opt.step) {
        if (!(*opt.step > 0.0) || !std::isfinite(*opt.step)) fail(ErrorKind::input, "--step must be a finite value > 0");
        c.integrator.step = *opt.step;
    }
    if (opt.out_dir) c.output_dir = *opt.out_dir;
    return c;
}

/// Runs the scenario and writes trace.csv and summary.json into the output directory.
inline json cmd_run(const Config& config, const RunOptions& opt = {}) {
    const Config c = apply_overrides(config, opt);
    const Scenario sc = build_scenario(c);
    const Trace trace = run(sc);
    const json summary = run_summary(trace, sc);

    const auto dir = detail::ensure_dir(c.output_dir);
    std::ostringstream csv;
    write_trace_csv(trace, sc, csv);
    detail::write_text(dir / "trace.csv", csv.str());
    detail::write_text(dir / "summary.json", summary.dump(2) + "\n");
    return summary;
}

/**
 * Runs the scenario twice, with the boundary layer and with the signum
 * nonlinearity, and writes both traces plus compare.json.
 */
inline json cmd_compare(const Config& config, const RunOptions& opt = {}) {
    Config c = apply_overrides(config, opt);
    c.controller.nonlinearity = Nonlinearity::boundary_layer;
    const Scenario cont = build_scenario(c);
    c.controller.nonlinearity = Nonlinearity::signum;
    const Scenario disc = build_scenario(c);
    const Trace tc = run(cont);
    const Trace td = run(disc);

    bool same_reference = tc.samples.size() == td.samples.size();
    for (std::size_t k = 0; same_reference && k < tc.samples.size(); ++k)
        same_reference = tc.samples[k].state.r_all() == td.samples[k].state.r_all();

    const auto tv_c = total_variation(tc);
    const auto tv_d = total_variation(td);
    json rep;
    rep["tv_continuous"] = tv_c.total;
    rep["tv_discontinuous"] = tv_d.total;
    rep["tv_ratio"] = tv_d.total > 0.0 ? json(tv_c.total / tv_d.total) : json(nullptr);
    json per_agent = json::array();
    for (std::size_t i = 0; i < tv_c.per_agent.size(); ++i)
        per_agent.push_back(tv_d.per_agent[i] > 0.0 ? json(tv_c.per_agent[i] / tv_d.per_agent[i]) : json(nullptr));
    rep["tv_ratio_per_agent"] = per_agent;
    rep["final_xi_norm_continuous"] = tc.samples.back().xi_norm;
    rep["final_xi_norm_discontinuous"] = td.samples.back().xi_norm;
    rep["identical_references"] = same_reference;

    const auto dir = detail::ensure_dir(c.output_dir);
    std::ostringstream a;
    std::ostringstream b;
    write_trace_csv(tc, cont, a);
    write_trace_csv(td, disc, b);
    detail::write_text(dir / "trace_continuous.csv", a.str());
    detail::write_text(dir / "trace_discontinuous.csv", b.str());
    detail::write_text(dir / "compare.json", rep.dump(2) + "\n");
    return rep;
}

/// Parses AVGTRACK_SEED; nullopt when unset.
inline std::optional<std::uint64_t> seed_from_env() {
    const char* raw = std::getenv("AVGTRACK_SEED");
    if (!raw) return std::nullopt;
    const std::string s(raw);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        fail(ErrorKind::input, "AVGTRACK_SEED must be a nonnegative integer, got \"" + s + "\"");
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), nullptr, 10);
    if (errno == ERANGE) fail(ErrorKind::input, "AVGTRACK_SEED is out of range");
    return static_cast<std::uint64_t>(v);
}

/// Error lines are "<kind>: <message>" with newlines flattened.
inline std::string error_line(ErrorKind kind, std::string msg) {
    for (char& ch : msg)
        if (ch == '\n' || ch == '\r') ch = ' ';
    return std::string(to_string(kind)) + ": " + msg;
}

/// Command-line entry point; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Distributed average tracking: gain design, simulation and chattering comparison", "avgtrack"};
    app.require_subcommand(1);

    std::string config_path;
    RunOptions opt;
    double horizon = 0.0;
    double step = 0.0;
    std::string out_dir;

    auto* gains = app.add_subcommand("gains", "print the designed gains and bounds as JSON");
    gains->add_option("config", config_path, "scenario JSON")->required();
    auto* runc = app.add_subcommand("run", "simulate and write trace.csv and summary.json");
    runc->add_option("config", config_path, "scenario JSON")->required();
    auto* h_opt = runc->add_option("--horizon", horizon, "simulated time T");
    auto* s_opt = runc->add_option("--step", step, "integration step h");
    auto* o_opt = runc->add_option("--out", out_dir, "output directory");
    auto* cmp = app.add_subcommand("compare", "continuous vs discontinuous nonlinearity");
    cmp->add_option("config", config_path, "scenario JSON")->required();
    auto* co_opt = cmp->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << error_line(ErrorKind::input, std::string("usage: ") + e.what()) << '\n';
        return exit_schema;
    }

    try {
        Config c = load_config(config_path);
        if (const auto seed = seed_from_env()) c.seed = *seed;
        if (*h_opt) opt.horizon = horizon;
        if (*s_opt) opt.step = step;
        if (*o_opt || *co_opt) opt.out_dir = out_dir;

        json result;
        if (gains->parsed()) {
            result = gains_report(c);
        } else if (runc->parsed()) {
            result = cmd_run(c, opt);
        } else {
            result = cmd_compare(c, opt);
        }
        out << result.dump(2) << '\n';
        return exit_ok;
    } catch (const Error& e) {
        err << error_line(e.kind(), e.what()) << '\n';
        return exit_code(e.kind());
    } catch (const json::exception& e) {
        err << error_line(ErrorKind::input, std::string("schema: ") + e.what()) << '\n';
        return exit_schema;
    } catch (const std::exception& e) {
        err << error_line(ErrorKind::io, e.what()) << '\n';
        return exit_schema;
    }
}

}  // namespace avgtrack
