#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "avgtrack/clocksync.hpp"
#include "avgtrack/controllers.hpp"
#include "avgtrack/error.hpp"
#include "avgtrack/graph.hpp"
#include "avgtrack/linalg.hpp"
#include "avgtrack/matrix.hpp"
#include "avgtrack/rk4.hpp"
#include "avgtrack/signals.hpp"

namespace avgtrack {

/**
 * @brief Stacked state of the whole network.
 *
 * Flat layout: filter states s (N·n), reference states r (N·n), local clocks
 * (N), then one α and one β per edge. The agent state is x_i = s_i + r_i.
 */
class SimState {
public:
    SimState(std::size_t agents, std::size_t dim, std::size_t edges)
        : agents_(agents), dim_(dim), edges_(edges), values_(2 * agents * dim + agents + 2 * edges, 0.0) {}

    std::size_t agents() const noexcept { return agents_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t edges() const noexcept { return edges_; }

    std::span<double> s(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
    std::span<const double> s(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
    std::span<double> r(std::size_t i) { return {values_.data() + r_offset() + i * dim_, dim_}; }
    std::span<const double> r(std::size_t i) const { return {values_.data() + r_offset() + i * dim_, dim_}; }
    std::span<double> clocks() { return {values_.data() + clock_offset(), agents_}; }
    std::span<const double> clocks() const { return {values_.data() + clock_offset(), agents_}; }
    std::span<double> alpha() { return {values_.data() + alpha_offset(), edges_}; }
    std::span<const double> alpha() const { return {values_.data() + alpha_offset(), edges_}; }
    std::span<double> beta() { return {values_.data() + beta_offset(), edges_}; }
    std::span<const double> beta() const { return {values_.data() + beta_offset(), edges_}; }

    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

    Mat s_all() const { return block(0); }
    Mat r_all() const { return block(r_offset()); }
    Mat x_all() const {
        Mat x = s_all();
        x += r_all();
        return x;
    }

    /// Human-readable name of a flat component, e.g. "s[2][1]" or "beta[4]".
    std::string component_name(std::size_t k) const {
        auto idx = [](std::size_t a) { return "[" + std::to_string(a) + "]"; };
        if (k < r_offset()) return "s" + idx(k / dim_) + idx(k % dim_);
        if (k < clock_offset()) return "r" + idx((k - r_offset()) / dim_) + idx((k - r_offset()) % dim_);
        if (k < alpha_offset()) return "clock" + idx(k - clock_offset());
        if (k < beta_offset()) return "alpha" + idx(k - alpha_offset());
        return "beta" + idx(k - beta_offset());
    }

    double time = 0.0;

    friend bool operator==(const SimState&, const SimState&) = default;

private:
    std::size_t r_offset() const noexcept { return agents_ * dim_; }
    std::size_t clock_offset() const noexcept { return 2 * agents_ * dim_; }
    std::size_t alpha_offset() const noexcept { return clock_offset() + agents_; }
    std::size_t beta_offset() const noexcept { return alpha_offset() + edges_; }

    Mat block(std::size_t offset) const {
        return Mat(agents_, dim_,
                   std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(offset),
                                       values_.begin() + static_cast<std::ptrdiff_t>(offset + agents_ * dim_)));
    }

    std::size_t agents_;
    std::size_t dim_;
    std::size_t edges_;
    std::vector<double> values_;
};

/// Everything needed to reproduce one simulation.
struct Scenario {
    Plant plant;
    Topology topology;
    InputFamily inputs;
    ControllerKind controller = ControllerKind::static_gain;
    Nonlinearity nonlinearity = Nonlinearity::boundary_layer;
    GainSet gains;
    std::optional<AdaptiveParams> adaptive;
    Mat r0;             ///< N x n initial reference states
    Mat s0;             ///< N x n initial filter states (empty = zero)
    Vec clocks0;        ///< initial local clocks (empty = all zero)
    Vec alpha0;         ///< per-edge initial α (empty = zero)
    Vec beta0;          ///< per-edge initial β (empty = zero)
    ClockConvention clock_convention = ClockConvention::attracting;
    std::optional<ClockSyncOptions> clock_sync;  ///< run the sync pre-phase from clocks0 when set
    double step = 1e-3;
    double horizon = 30.0;
    std::size_t stride_steps = 10;  ///< samples every stride_steps integration steps
};

/// Throws a design error (assumption violated) or input error (malformed scenario).
inline void validate(const Scenario& sc) {
    const std::size_t agents = sc.topology.vertex_count();
    const std::size_t n = sc.plant.state_dim();
    if (sc.inputs.agent_count() != agents) fail(ErrorKind::input, "scenario: input family size does not match agent count");
    if (sc.inputs.channels() != sc.plant.input_dim()) fail(ErrorKind::input, "scenario: input width does not match B");
    if (sc.r0.rows() != agents || sc.r0.cols() != n) fail(ErrorKind::input, "scenario: r0 must be N x n");
    if (!sc.s0.empty() && (sc.s0.rows() != agents || sc.s0.cols() != n)) fail(ErrorKind::input, "scenario: s0 must be N x n");
    if (!sc.clocks0.empty() && sc.clocks0.size() != agents) fail(ErrorKind::input, "scenario: one initial clock per agent");
    if (!sc.alpha0.empty() && sc.alpha0.size() != sc.topology.edge_count()) fail(ErrorKind::input, "scenario: one alpha per edge");
    if (!sc.beta0.empty() && sc.beta0.size() != sc.topology.edge_count()) fail(ErrorKind::input, "scenario: one beta per edge");
    if (sc.gains.K.rows() != sc.plant.input_dim() || sc.gains.K.cols() != n)
        fail(ErrorKind::input, "scenario: K must be p x n");
    if (!(sc.step > 0.0)) fail(ErrorKind::input, "scenario: integration step must be positive");
    if (!(sc.horizon >= 0.0)) fail(ErrorKind::input, "scenario: horizon must be nonnegative");
    if (sc.stride_steps == 0) fail(ErrorKind::input, "scenario: sampling stride must be at least one step");
    if (sc.controller == ControllerKind::adaptive && !sc.adaptive)
        fail(ErrorKind::input, "scenario: adaptive controller requires adaptive parameters");

    if (!is_connected(sc.topology)) fail(ErrorKind::design, "assumption 1 violated: communication graph is not connected");
    if (!is_stabilizable(sc.plant.A, sc.plant.B)) fail(ErrorKind::design, "assumption 2 violated: (A, B) is not stabilizable");

    // Without a stable A the sum Σs_i evolves as ṡ = A·s and must start at zero.
    const bool needs_zero_filter = sc.controller != ControllerKind::modified && !is_hurwitz(sc.plant.A);
    if (needs_zero_filter && !sc.s0.empty() && max_abs(sc.s0) != 0.0) {
        fail(ErrorKind::design, "static and adaptive laws require s_i(0) = 0 when A is not Hurwitz; use the modified law");
    }
}

inline SimState initial_state(const Scenario& sc) {
    const std::size_t agents = sc.topology.vertex_count();
    const std::size_t n = sc.plant.state_dim();
    SimState st(agents, n, sc.topology.edge_count());
    for (std::size_t i = 0; i < agents; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            st.r(i)[k] = sc.r0(i, k);
            st.s(i)[k] = sc.s0.empty() ? 0.0 : sc.s0(i, k);
        }
        st.clocks()[i] = sc.clocks0.empty() ? 0.0 : sc.clocks0[i];
    }
    for (std::size_t e = 0; e < sc.topology.edge_count(); ++e) {
        st.alpha()[e] = sc.alpha0.empty() ? 0.0 : sc.alpha0[e];
        st.beta()[e] = sc.beta0.empty() ? 0.0 : sc.beta0[e];
    }
    return st;
}

/// Controls of all agents (N x p) at the given state.
inline Mat controls(const Scenario& sc, const SimState& st) {
    const Mat x = st.x_all();
    const auto clocks = st.clocks();
    Mat u(sc.topology.vertex_count(), sc.plant.input_dim());
    for (std::size_t i = 0; i < u.rows(); ++i) {
        Vec ui;
        switch (sc.controller) {
            case ControllerKind::static_gain:
                ui = static_control(i, x, sc.gains, clocks[i], sc.topology, sc.nonlinearity).u;
                break;
            case ControllerKind::modified:
                ui = modified_control(i, x, sc.gains, clocks[i], sc.topology, sc.nonlinearity).u;
                break;
            case ControllerKind::adaptive:
                ui = adaptive_control(i, x, sc.gains, *sc.adaptive, st.alpha(), st.beta(), clocks[i], sc.topology,
                                      sc.nonlinearity)
                         .u;
                break;
        }
        std::copy(ui.begin(), ui.end(), u.row(i).begin());
    }
    return u;
}

namespace detail {

/// Right-hand side of the stacked closed loop. The per-edge gain rates use the tail agent's clock.
inline void closed_loop_rhs(const Scenario& sc, double t, const SimState& st, SimState& rate) {
    const std::size_t agents = st.agents();
    const Mat x = st.x_all();
    const auto clocks = st.clocks();
    const Plant& plant = sc.plant;

    for (std::size_t i = 0; i < agents; ++i) {
        Vec u;
        switch (sc.controller) {
            case ControllerKind::static_gain:
                u = static_control(i, x, sc.gains, clocks[i], sc.topology, sc.nonlinearity).u;
                break;
            case ControllerKind::modified:
                u = modified_control(i, x, sc.gains, clocks[i], sc.topology, sc.nonlinearity).u;
                break;
            case ControllerKind::adaptive: {
                auto res = adaptive_control(i, x, sc.gains, *sc.adaptive, st.alpha(), st.beta(), clocks[i], sc.topology,
                                            sc.nonlinearity);
                for (const auto& er : res.rates) {
                    if (sc.topology.edges()[er.edge].tail != i) continue;
                    rate.alpha()[er.edge] = er.alpha_dot;
                    rate.beta()[er.edge] = er.beta_dot;
                }
                u = std::move(res.u);
                break;
            }
        }
        const Vec ds = reference_derivative(plant, st.s(i), u);
        const Vec dr = reference_derivative(plant, st.r(i), input_value(sc.inputs, i, t));
        std::copy(ds.begin(), ds.end(), rate.s(i).begin());
        std::copy(dr.begin(), dr.end(), rate.r(i).begin());
    }
    const Vec dclock = clock_rates(clocks, sc.topology, sc.clock_convention);
    std::copy(dclock.begin(), dclock.end(), rate.clocks().begin());

    for (std::size_t k = 0; k < rate.values().size(); ++k) {
        if (!std::isfinite(rate.values()[k])) {
            fail(ErrorKind::numerical, "integration blow-up: derivative of " + rate.component_name(k) +
                                           " is not finite at t = " + std::to_string(t));
        }
    }
}

}  // namespace detail

/// One classical RK4 step of the full closed loop; advances state.time by h.
inline SimState step_rk4(const SimState& state, const Scenario& sc, double h, Rk4Workspace* workspace = nullptr) {
    if (!(h > 0.0)) fail(ErrorKind::input, "step_rk4: step must be positive");
    Rk4Workspace local;
    Rk4Workspace& ws = workspace ? *workspace : local;
    SimState stage(state.agents(), state.dim(), state.edges());
    SimState rate(state.agents(), state.dim(), state.edges());
    auto rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
        std::copy(y.begin(), y.end(), stage.values().begin());
        stage.time = t;
        for (std::size_t k = 0; k < y.size(); ++k) {
            if (!std::isfinite(y[k])) {
                fail(ErrorKind::numerical, "integration blow-up: " + stage.component_name(k) +
                                               " is not finite at t = " + std::to_string(t));
            }
        }
        std::fill(rate.values().begin(), rate.values().end(), 0.0);
        detail::closed_loop_rhs(sc, t, stage, rate);
        std::copy(rate.values().begin(), rate.values().end(), dy.begin());
    };
    SimState next = state;
    rk4_step(rhs, state.time, next.values(), h, ws);
    next.time = state.time + h;
    return next;
}

struct ConsensusError {
    Mat xi;  ///< N x n, ξ_i = x_i − mean(x)
    double norm = 0.0;
};

inline ConsensusError consensus_error(const Mat& x) {
    ConsensusError out{x, 0.0};
    const double inv = 1.0 / static_cast<double>(x.rows());
    for (std::size_t k = 0; k < x.cols(); ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) mean += x(i, k);
        mean *= inv;
        for (std::size_t i = 0; i < x.rows(); ++i) out.xi(i, k) -= mean;
    }
    out.norm = frobenius_norm(out.xi);
    return out;
}

/// x_i − (1/N)Σ_k r_k, one row per agent.
inline Mat tracking_error(const Mat& x, const Mat& r) {
    if (x.rows() != r.rows() || x.cols() != r.cols()) fail(ErrorKind::input, "tracking_error: shape mismatch");
    Mat out = x;
    const double inv = 1.0 / static_cast<double>(r.rows());
    for (std::size_t k = 0; k < r.cols(); ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < r.rows(); ++i) mean += r(i, k);
        mean *= inv;
        for (std::size_t i = 0; i < r.rows(); ++i) out(i, k) -= mean;
    }
    return out;
}

/// V₁ = ξᵀ(M⊗P)ξ = Σ_i ξ_iᵀPξ_i − (1/N)(Σ_i ξ_i)ᵀP(Σ_i ξ_i).
inline double lyapunov_v1(const Mat& xi, const Mat& p) {
    if (xi.cols() != p.rows()) fail(ErrorKind::input, "lyapunov_v1: P does not match the state dimension");
    double total = 0.0;
    Vec sum(xi.cols(), 0.0);
    for (std::size_t i = 0; i < xi.rows(); ++i) {
        total += quadratic_form(p, xi.row(i), xi.row(i));
        for (std::size_t k = 0; k < xi.cols(); ++k) sum[k] += xi(i, k);
    }
    return total - quadratic_form(p, sum, sum) / static_cast<double>(xi.rows());
}

/**
 * V₂ = V₁ + Σ_i Σ_{j∈N_i} (α̃_ij²/2μ + β̃_ij²/2ν), α̃ = α − ᾱ, β̃ = β − β̄.
 * The double sum runs over ordered neighbor pairs, so each stored edge counts twice.
 */
inline double lyapunov_v2(const Mat& xi, const Mat& p, std::span<const double> alpha, std::span<const double> beta,
                          double alpha_bar, double beta_bar, double mu, double nu) {
    double v = lyapunov_v1(xi, p);
    for (std::size_t e = 0; e < alpha.size(); ++e) {
        const double da = alpha[e] - alpha_bar;
        const double db = beta[e] - beta_bar;
        v += 2.0 * (da * da / (2.0 * mu) + db * db / (2.0 * nu));
    }
    return v;
}

struct TraceSample {
    SimState state;
    Mat u;               ///< N x p controls
    Mat xi;              ///< N x n consensus error
    double xi_norm = 0.0;
    double tracking_norm = 0.0;  ///< ‖x − 1⊗mean(r)‖
    double v1 = 0.0;
    std::optional<double> v2;
    double clock_spread = 0.0;
    double conservation = 0.0;  ///< ‖Σx − Σr‖

    double time() const noexcept { return state.time; }
};

struct Trace {
    std::vector<TraceSample> samples;
    SimState final_state{0, 0, 0};
    std::optional<ClockSyncResult> sync;
    double step = 0.0;
    std::size_t stride_steps = 1;
};

inline TraceSample make_sample(const Scenario& sc, const SimState& st) {
    TraceSample s{st, controls(sc, st), Mat(), 0.0, 0.0, 0.0, std::nullopt, clock_spread(st.clocks()), 0.0};
    const Mat x = st.x_all();
    const Mat r = st.r_all();
    auto ce = consensus_error(x);
    s.xi_norm = ce.norm;
    s.tracking_norm = frobenius_norm(tracking_error(x, r));
    s.v1 = lyapunov_v1(ce.xi, sc.gains.P);
    if (sc.controller == ControllerKind::adaptive) {
        const auto b = coupling_bounds(sc.gains.lambda2, sc.gains.f0, sc.topology.vertex_count());
        s.v2 = lyapunov_v2(ce.xi, sc.gains.P, st.alpha(), st.beta(), b.alpha_bar, b.beta_bar, sc.adaptive->mu,
                           sc.adaptive->nu);
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < x.cols(); ++k) {
        double d = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) d += st.s(i)[k];  // Σx − Σr = Σs
        acc += d * d;
    }
    s.conservation = std::sqrt(acc);
    s.xi = std::move(ce.xi);
    return s;
}

/**
 * @brief Runs the scenario: optional clock synchronization, then fixed-step
 * RK4 of the tracking phase from t = 0 to the horizon.
 *
 * After synchronization every clock is set to the common mean value, which
 * the sync dynamics advance at unit rate regardless of the offsets.
 */
inline Trace run(const Scenario& sc) {
    validate(sc);
    Trace trace;
    trace.step = sc.step;
    trace.stride_steps = sc.stride_steps;

    SimState st = initial_state(sc);
    if (sc.clock_sync) {
        ClockSyncOptions opt = *sc.clock_sync;
        opt.convention = sc.clock_convention;
        Vec start(st.clocks().begin(), st.clocks().end());
        trace.sync = synchronize_clocks(std::move(start), sc.topology, opt);
        const Vec& fin = trace.sync->final_clocks;
        if (trace.sync->settling_time) {
            double mean = 0.0;
            for (double c : fin) mean += c;
            mean /= static_cast<double>(fin.size());
            std::fill(st.clocks().begin(), st.clocks().end(), mean);
        } else {
            std::copy(fin.begin(), fin.end(), st.clocks().begin());
        }
    }

    const auto steps = static_cast<std::size_t>(std::llround(sc.horizon / sc.step));
    Rk4Workspace ws;
    trace.samples.push_back(make_sample(sc, st));
    for (std::size_t k = 1; k <= steps; ++k) {
        st = step_rk4(st, sc, sc.step, &ws);
        st.time = static_cast<double>(k) * sc.step;  // no drift from repeated addition
        if (k % sc.stride_steps == 0) trace.samples.push_back(make_sample(sc, st));
    }
    trace.final_state = st;
    return trace;
}

struct DecayReport {
    std::size_t checked = 0;
    std::size_t violations = 0;
    double fraction = 0.0;
    double worst_excess = 0.0;  ///< largest V̇₁ − bound − tol seen (≤ 0 when clean)
};

/**
 * Checks V̇₁ ≤ −γV₁ + c₂·ε·Σ_i |N_i|·e^{−φ·t_i} + tol along a static-law trace,
 * with V̇₁ from central differences at the sample stride and
 * tol = 1e-6·(1 + |V₁|).
 */
inline DecayReport decay_check(const Trace& trace, const GainSet& g, const Topology& topo) {
    DecayReport rep;
    rep.worst_excess = -INFINITY;
    const auto& s = trace.samples;
    for (std::size_t k = 1; k + 1 < s.size(); ++k) {
        const double dv = (s[k + 1].v1 - s[k - 1].v1) / (s[k + 1].time() - s[k - 1].time());
        double forcing = 0.0;
        const auto clocks = s[k].state.clocks();
        for (std::size_t i = 0; i < topo.vertex_count(); ++i)
            forcing += static_cast<double>(topo.degree(i)) * std::exp(-g.phi * clocks[i]);
        forcing *= g.c2 * g.eps;
        const double v = s[k].v1;
        const double excess = dv - (-g.gamma_rate * v + forcing + 1e-6 * (1.0 + std::abs(v)));
        rep.worst_excess = std::max(rep.worst_excess, excess);
        ++rep.checked;
        if (excess > 0.0) ++rep.violations;
    }
    rep.fraction = rep.checked ? static_cast<double>(rep.violations) / static_cast<double>(rep.checked) : 0.0;
    if (rep.checked == 0) rep.worst_excess = 0.0;
    return rep;
}

/**
 * Solution of the comparison equation V̇ = −γV + c₂ε·Σ|N_i|·e^{−φ(t₀+t)} from
 * V(0) = v1_initial. With synchronized clocks starting at t₀ the static-law
 * V₁(t) stays below it.
 */
inline double static_decay_envelope(double v1_initial, const GainSet& g, const Topology& topo, double clock_start,
                                    double t) {
    const double forcing = g.c2 * static_cast<double>(topo.degree_sum()) * g.eps * std::exp(-g.phi * clock_start);
    const double gamma = g.gamma_rate;
    const double phi = g.phi;
    const double integral = std::abs(gamma - phi) < 1e-12 ? t * std::exp(-gamma * t)
                                                          : (std::exp(-phi * t) - std::exp(-gamma * t)) / (gamma - phi);
    return std::exp(-gamma * t) * v1_initial + forcing * integral;
}

struct TotalVariation {
    Vec per_agent;
    double total = 0.0;
};

/// Σ_k ‖u_i(t_{k+1}) − u_i(t_k)‖ over the recorded samples.
inline TotalVariation total_variation(const Trace& trace) {
    TotalVariation tv;
    if (trace.samples.empty()) return tv;
    const std::size_t agents = trace.samples.front().u.rows();
    tv.per_agent.assign(agents, 0.0);
    for (std::size_t k = 1; k < trace.samples.size(); ++k) {
        const Mat& a = trace.samples[k - 1].u;
        const Mat& b = trace.samples[k].u;
        for (std::size_t i = 0; i < agents; ++i) {
            double acc = 0.0;
            for (std::size_t c = 0; c < a.cols(); ++c) acc += (b(i, c) - a(i, c)) * (b(i, c) - a(i, c));
            tv.per_agent[i] += std::sqrt(acc);
        }
    }
    for (double v : tv.per_agent) tv.total += v;
    return tv;
}

/// Uniform [lo, hi) matrix from a seeded 64-bit Mersenne Twister; the
/// 53-bit mantissa mapping is spelled out so values are identical on every platform.
inline Mat seeded_uniform(std::size_t rows, std::size_t cols, double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    Mat m(rows, cols);
    for (double& v : m.data()) {
        const double unit = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        v = lo + (hi - lo) * unit;
    }
    return m;
}

}  // namespace avgtrack
