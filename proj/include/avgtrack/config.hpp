#pragma once

// JSON scenario documents: parsing with strict key checking, normalized
// serialization, and translation into an engine Scenario.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "avgtrack/clocksync.hpp"
#include "avgtrack/controllers.hpp"
#include "avgtrack/engine.hpp"
#include "avgtrack/error.hpp"
#include "avgtrack/graph.hpp"
#include "avgtrack/matrix.hpp"
#include "avgtrack/signals.hpp"

namespace avgtrack {

using json = nlohmann::json;

/// r_i(0) drawn uniformly from [lo, hi) with the document seed.
struct UniformInit {
    double lo = -1.0;
    double hi = 1.0;
    friend bool operator==(const UniformInit&, const UniformInit&) = default;
};

struct ControllerConfig {
    ControllerKind kind = ControllerKind::static_gain;
    Nonlinearity nonlinearity = Nonlinearity::boundary_layer;
    double eps = 1.0;
    double phi = 0.0;
    std::optional<double> c1;  ///< override; must not be below 1/(2λ₂)
    std::optional<double> c2;  ///< override; must not be below f₀(N−1)√N
    std::optional<double> mu;
    std::optional<double> nu;
    std::optional<double> theta;
    std::optional<double> chi;
    friend bool operator==(const ControllerConfig&, const ControllerConfig&) = default;
};

struct ClockSyncConfig {
    bool enabled = false;
    Vec initial_offsets;  ///< empty = all clocks start at zero
    ClockConvention convention = ClockConvention::attracting;
    double step = 1e-5;
    double tol = 1e-9;
    double max_time = 100.0;
    friend bool operator==(const ClockSyncConfig&, const ClockSyncConfig&) = default;
};

struct InitialConfig {
    std::variant<Mat, UniformInit> r = UniformInit{};
    std::optional<Mat> s;
    std::optional<Vec> alpha;
    std::optional<Vec> beta;
    friend bool operator==(const InitialConfig&, const InitialConfig&) = default;
};

struct IntegratorConfig {
    double step = 1e-3;
    double horizon = 30.0;
    std::size_t stride = 10;
    friend bool operator==(const IntegratorConfig&, const IntegratorConfig&) = default;
};

struct Config {
    Mat A;
    Mat B;
    Mat Q;
    std::size_t vertices = 0;
    std::vector<Edge> edges;
    std::vector<InputSpec> inputs;
    ControllerConfig controller;
    ClockSyncConfig clock_sync;
    InitialConfig initial;
    IntegratorConfig integrator;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    friend bool operator==(const Config&, const Config&) = default;
};

namespace detail {

[[noreturn]] inline void schema_error(const std::string& path, const std::string& what) {
    fail(ErrorKind::input, "schema: " + path + ": " + what);
}

inline void require_object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) schema_error(path, "expected an object");
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) schema_error(path, "unknown key \"" + key + "\"");
    }
}

inline const json& member(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) schema_error(path, std::string("missing key \"") + key + "\"");
    return j.at(key);
}

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) schema_error(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) schema_error(path, "expected a finite number");
    return v;
}

inline std::size_t get_count(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) schema_error(path, "expected a nonnegative integer");
    return j.get<std::size_t>();
}

inline Vec get_vector(const json& j, const std::string& path) {
    if (!j.is_array()) schema_error(path, "expected an array of numbers");
    Vec v;
    for (std::size_t k = 0; k < j.size(); ++k) v.push_back(get_number(j[k], path + "[" + std::to_string(k) + "]"));
    return v;
}

inline Mat get_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) schema_error(path, "expected a non-empty array of rows");
    std::vector<double> data;
    std::size_t cols = 0;
    for (std::size_t r = 0; r < j.size(); ++r) {
        const Vec row = get_vector(j[r], path + "[" + std::to_string(r) + "]");
        if (r == 0) cols = row.size();
        if (row.empty() || row.size() != cols) schema_error(path, "rows must be non-empty and of equal length");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Mat(j.size(), cols, std::move(data));
}

inline json matrix_json(const Mat& m) {
    json out = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        out.push_back(json(std::vector<double>(row.begin(), row.end())));
    }
    return out;
}

inline InputSpec parse_input(const json& j, const std::string& path) {
    if (!j.is_object()) schema_error(path, "expected an object");
    const json& type = member(j, path, "type");
    if (!type.is_string()) schema_error(join(path, "type"), "expected a string");
    const auto t = type.get<std::string>();
    if (t == "zero") {
        require_object(j, path, {"type"});
        return ZeroInput{};
    }
    if (t == "constant") {
        require_object(j, path, {"type", "value"});
        return ConstantInput{get_vector(member(j, path, "value"), join(path, "value"))};
    }
    if (t == "sinusoid") {
        require_object(j, path, {"type", "amplitude", "omega", "phase"});
        SinusoidInput s{get_vector(member(j, path, "amplitude"), join(path, "amplitude"))};
        if (j.contains("omega")) s.omega = get_number(j["omega"], join(path, "omega"));
        if (j.contains("phase")) s.phase = get_number(j["phase"], join(path, "phase"));
        return s;
    }
    schema_error(join(path, "type"), "unknown input type \"" + t + "\" (zero, constant, sinusoid)");
}

inline json input_json(const InputSpec& spec) {
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ZeroInput>) {
                return {{"type", "zero"}};
            } else if constexpr (std::is_same_v<T, ConstantInput>) {
                return {{"type", "constant"}, {"value", s.value}};
            } else {
                return {{"type", "sinusoid"}, {"amplitude", s.amplitude}, {"omega", s.omega}, {"phase", s.phase}};
            }
        },
        spec);
}

template <typename Enum>
Enum parse_enum(const json& j, const std::string& path, std::initializer_list<std::pair<const char*, Enum>> names) {
    if (!j.is_string()) schema_error(path, "expected a string");
    const auto s = j.get<std::string>();
    std::string options;
    for (const auto& [name, value] : names) {
        if (s == name) return value;
        options += options.empty() ? name : std::string(", ") + name;
    }
    schema_error(path, "unknown value \"" + s + "\" (" + options + ")");
}

inline const char* controller_name(ControllerKind k) {
    switch (k) {
        case ControllerKind::static_gain: return "static";
        case ControllerKind::modified: return "modified";
        case ControllerKind::adaptive: return "adaptive";
    }
    return "static";
}

inline const char* nonlinearity_name(Nonlinearity n) {
    return n == Nonlinearity::boundary_layer ? "boundary_layer" : "signum";
}

inline const char* convention_name(ClockConvention c) {
    return c == ClockConvention::attracting ? "attracting" : "repelling";
}

inline void optional_number(const json& j, const std::string& path, const char* key, std::optional<double>& out) {
    if (j.contains(key)) out = get_number(j[key], join(path, key));
}

inline void put_optional(json& j, const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
}

}  // namespace detail

/// Parses a scenario document. Unknown keys and malformed values are input errors.
inline Config parse_config(const json& doc) {
    using namespace detail;
    require_object(doc, "$", {"plant", "Q", "topology", "inputs", "controller", "clock_sync", "initial", "integrator",
                              "output", "seed"});
    Config c;

    const json& plant = member(doc, "$", "plant");
    require_object(plant, "plant", {"A", "B"});
    c.A = get_matrix(member(plant, "plant", "A"), "plant.A");
    c.B = get_matrix(member(plant, "plant", "B"), "plant.B");
    if (!c.A.is_square()) schema_error("plant.A", "must be square");
    if (c.B.rows() != c.A.rows()) schema_error("plant.B", "must have as many rows as A");
    c.Q = doc.contains("Q") ? get_matrix(doc["Q"], "Q") : Mat::identity(c.A.rows());
    if (c.Q.rows() != c.A.rows() || !c.Q.is_square()) schema_error("Q", "must be n x n");

    const json& topo = member(doc, "$", "topology");
    require_object(topo, "topology", {"vertices", "edges"});
    c.vertices = get_count(member(topo, "topology", "vertices"), "topology.vertices");
    const json& edges = member(topo, "topology", "edges");
    if (!edges.is_array()) schema_error("topology.edges", "expected an array of [tail, head] pairs");
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const std::string p = "topology.edges[" + std::to_string(e) + "]";
        if (!edges[e].is_array() || edges[e].size() != 2) schema_error(p, "expected a [tail, head] pair");
        c.edges.push_back({get_count(edges[e][0], p + "[0]"), get_count(edges[e][1], p + "[1]")});
    }

    const json& inputs = member(doc, "$", "inputs");
    if (!inputs.is_array()) schema_error("inputs", "expected an array with one input per agent");
    for (std::size_t i = 0; i < inputs.size(); ++i) c.inputs.push_back(parse_input(inputs[i], "inputs[" + std::to_string(i) + "]"));
    if (c.inputs.size() != c.vertices) schema_error("inputs", "expected one input per agent");

    const json& ctl = member(doc, "$", "controller");
    require_object(ctl, "controller", {"kind", "nonlinearity", "eps", "phi", "c1", "c2", "mu", "nu", "theta", "chi"});
    c.controller.kind = parse_enum<ControllerKind>(member(ctl, "controller", "kind"), "controller.kind",
                                                   {{"static", ControllerKind::static_gain},
                                                    {"modified", ControllerKind::modified},
                                                    {"adaptive", ControllerKind::adaptive}});
    if (ctl.contains("nonlinearity")) {
        c.controller.nonlinearity = parse_enum<Nonlinearity>(
            ctl["nonlinearity"], "controller.nonlinearity",
            {{"boundary_layer", Nonlinearity::boundary_layer}, {"signum", Nonlinearity::signum}});
    }
    if (ctl.contains("eps")) c.controller.eps = get_number(ctl["eps"], "controller.eps");
    if (ctl.contains("phi")) c.controller.phi = get_number(ctl["phi"], "controller.phi");
    optional_number(ctl, "controller", "c1", c.controller.c1);
    optional_number(ctl, "controller", "c2", c.controller.c2);
    optional_number(ctl, "controller", "mu", c.controller.mu);
    optional_number(ctl, "controller", "nu", c.controller.nu);
    optional_number(ctl, "controller", "theta", c.controller.theta);
    optional_number(ctl, "controller", "chi", c.controller.chi);
    if (c.controller.kind == ControllerKind::adaptive &&
        !(c.controller.mu && c.controller.nu && c.controller.theta && c.controller.chi)) {
        schema_error("controller", "adaptive controller requires mu, nu, theta and chi");
    }

    if (doc.contains("clock_sync")) {
        const json& cs = doc["clock_sync"];
        require_object(cs, "clock_sync", {"enabled", "initial_offsets", "convention", "step", "tol", "max_time"});
        if (cs.contains("enabled")) {
            if (!cs["enabled"].is_boolean()) schema_error("clock_sync.enabled", "expected true or false");
            c.clock_sync.enabled = cs["enabled"].get<bool>();
        }
        if (cs.contains("initial_offsets")) c.clock_sync.initial_offsets = get_vector(cs["initial_offsets"], "clock_sync.initial_offsets");
        if (cs.contains("convention")) {
            c.clock_sync.convention = parse_enum<ClockConvention>(
                cs["convention"], "clock_sync.convention",
                {{"attracting", ClockConvention::attracting}, {"repelling", ClockConvention::repelling}});
        }
        if (cs.contains("step")) c.clock_sync.step = get_number(cs["step"], "clock_sync.step");
        if (cs.contains("tol")) c.clock_sync.tol = get_number(cs["tol"], "clock_sync.tol");
        if (cs.contains("max_time")) c.clock_sync.max_time = get_number(cs["max_time"], "clock_sync.max_time");
        if (!c.clock_sync.initial_offsets.empty() && c.clock_sync.initial_offsets.size() != c.vertices)
            schema_error("clock_sync.initial_offsets", "expected one offset per agent");
    }

    const json& init = member(doc, "$", "initial");
    require_object(init, "initial", {"r", "s", "alpha", "beta"});
    const json& r = member(init, "initial", "r");
    if (r.is_object()) {
        require_object(r, "initial.r", {"uniform"});
        const Vec range = get_vector(member(r, "initial.r", "uniform"), "initial.r.uniform");
        if (range.size() != 2 || !(range[0] < range[1])) schema_error("initial.r.uniform", "expected [lo, hi] with lo < hi");
        c.initial.r = UniformInit{range[0], range[1]};
    } else {
        c.initial.r = get_matrix(r, "initial.r");
    }
    if (init.contains("s")) c.initial.s = get_matrix(init["s"], "initial.s");
    if (init.contains("alpha")) c.initial.alpha = get_vector(init["alpha"], "initial.alpha");
    if (init.contains("beta")) c.initial.beta = get_vector(init["beta"], "initial.beta");

    if (doc.contains("integrator")) {
        const json& in = doc["integrator"];
        require_object(in, "integrator", {"step", "horizon", "stride"});
        if (in.contains("step")) c.integrator.step = get_number(in["step"], "integrator.step");
        if (in.contains("horizon")) c.integrator.horizon = get_number(in["horizon"], "integrator.horizon");
        if (in.contains("stride")) c.integrator.stride = get_count(in["stride"], "integrator.stride");
        if (!(c.integrator.step > 0.0)) schema_error("integrator.step", "must be positive");
        if (!(c.integrator.horizon >= 0.0)) schema_error("integrator.horizon", "must be nonnegative");
        if (c.integrator.stride == 0) schema_error("integrator.stride", "must be at least 1");
    }

    if (doc.contains("output")) {
        const json& out = doc["output"];
        require_object(out, "output", {"dir"});
        if (out.contains("dir")) {
            if (!out["dir"].is_string()) schema_error("output.dir", "expected a string");
            c.output_dir = out["dir"].get<std::string>();
        }
    }
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned() && !(doc["seed"].is_number_integer() && doc["seed"].get<std::int64_t>() >= 0))
            schema_error("seed", "expected a nonnegative integer");
        c.seed = doc["seed"].get<std::uint64_t>();
    }
    return c;
}

/// Normalized document: every field spelled out, so parse(to_json(c)) == c.
inline json to_json(const Config& c) {
    using namespace detail;
    json doc;
    doc["plant"] = {{"A", matrix_json(c.A)}, {"B", matrix_json(c.B)}};
    doc["Q"] = matrix_json(c.Q);
    json edges = json::array();
    for (const auto& e : c.edges) edges.push_back({e.tail, e.head});
    doc["topology"] = {{"vertices", c.vertices}, {"edges", edges}};
    doc["inputs"] = json::array();
    for (const auto& in : c.inputs) doc["inputs"].push_back(input_json(in));

    json ctl = {{"kind", controller_name(c.controller.kind)},
                {"nonlinearity", nonlinearity_name(c.controller.nonlinearity)},
                {"eps", c.controller.eps},
                {"phi", c.controller.phi}};
    put_optional(ctl, "c1", c.controller.c1);
    put_optional(ctl, "c2", c.controller.c2);
    put_optional(ctl, "mu", c.controller.mu);
    put_optional(ctl, "nu", c.controller.nu);
    put_optional(ctl, "theta", c.controller.theta);
    put_optional(ctl, "chi", c.controller.chi);
    doc["controller"] = ctl;

    doc["clock_sync"] = {{"enabled", c.clock_sync.enabled},
                         {"initial_offsets", c.clock_sync.initial_offsets},
                         {"convention", convention_name(c.clock_sync.convention)},
                         {"step", c.clock_sync.step},
                         {"tol", c.clock_sync.tol},
                         {"max_time", c.clock_sync.max_time}};

    json init;
    if (const auto* u = std::get_if<UniformInit>(&c.initial.r)) {
        init["r"] = {{"uniform", {u->lo, u->hi}}};
    } else {
        init["r"] = matrix_json(std::get<Mat>(c.initial.r));
    }
    if (c.initial.s) init["s"] = matrix_json(*c.initial.s);
    if (c.initial.alpha) init["alpha"] = *c.initial.alpha;
    if (c.initial.beta) init["beta"] = *c.initial.beta;
    doc["initial"] = init;

    doc["integrator"] = {{"step", c.integrator.step}, {"horizon", c.integrator.horizon}, {"stride", c.integrator.stride}};
    doc["output"] = {{"dir", c.output_dir}};
    doc["seed"] = c.seed;
    return doc;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        fail(ErrorKind::input, "schema: " + path + " is not valid JSON (byte " + std::to_string(e.byte) + ")");
    }
}

inline Config load_config(const std::string& path) { return parse_config(read_json_file(path)); }

/// Gains for the document, with c1/c2 overrides checked against their lower bounds.
inline GainSet design_from_config(const Config& c) {
    const Plant plant(c.A, c.B);
    const Topology topo(c.vertices, c.edges);
    const InputFamily inputs(c.inputs, c.B.cols());
    GainSet g = design_gains(plant, topo, inputs, c.Q, c.controller.eps, c.controller.phi);
    const double slack = 1.0 - 1e-12;
    if (c.controller.c1) {
        if (!(*c.controller.c1 >= g.c1 * slack))
            fail(ErrorKind::design, "c1 = " + std::to_string(*c.controller.c1) + " is below 1/(2 lambda2) = " + std::to_string(g.c1));
        g.c1 = *c.controller.c1;
    }
    if (c.controller.c2) {
        if (!(*c.controller.c2 >= g.c2 * slack))
            fail(ErrorKind::design, "c2 = " + std::to_string(*c.controller.c2) + " is below f0(N-1)sqrt(N) = " + std::to_string(g.c2));
        g.c2 = *c.controller.c2;
    }
    return g;
}

inline std::optional<AdaptiveParams> adaptive_from_config(const Config& c, const GainSet& g) {
    if (!(c.controller.mu && c.controller.nu && c.controller.theta && c.controller.chi)) return std::nullopt;
    return design_adaptive_params(g, *c.controller.mu, *c.controller.nu, *c.controller.theta, *c.controller.chi);
}

/// Engine scenario for the document; the seed drives any uniform initial condition.
inline Scenario build_scenario(const Config& c) {
    const GainSet g = design_from_config(c);
    Scenario sc{Plant(c.A, c.B), Topology(c.vertices, c.edges), InputFamily(c.inputs, c.B.cols()),
                c.controller.kind, c.controller.nonlinearity, g, std::nullopt, Mat(), Mat(), Vec(), Vec(), Vec(),
                ClockConvention::attracting, std::nullopt};
    if (c.controller.kind == ControllerKind::adaptive) sc.adaptive = adaptive_from_config(c, g);
    if (const auto* u = std::get_if<UniformInit>(&c.initial.r)) {
        sc.r0 = seeded_uniform(c.vertices, c.A.rows(), u->lo, u->hi, c.seed);
    } else {
        sc.r0 = std::get<Mat>(c.initial.r);
    }
    if (c.initial.s) sc.s0 = *c.initial.s;
    if (c.initial.alpha) sc.alpha0 = *c.initial.alpha;
    if (c.initial.beta) sc.beta0 = *c.initial.beta;
    sc.clocks0 = c.clock_sync.initial_offsets;
    sc.clock_convention = c.clock_sync.convention;
    if (c.clock_sync.enabled) {
        ClockSyncOptions opt;
        opt.convention = c.clock_sync.convention;
        opt.step = c.clock_sync.step;
        opt.tol = c.clock_sync.tol;
        opt.max_time = c.clock_sync.max_time;
        sc.clock_sync = opt;
    }
    sc.step = c.integrator.step;
    sc.horizon = c.integrator.horizon;
    sc.stride_steps = c.integrator.stride;
    validate(sc);
    return sc;
}

}  // namespace avgtrack
