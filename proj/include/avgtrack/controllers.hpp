#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avgtrack/error.hpp"
#include "avgtrack/graph.hpp"
#include "avgtrack/linalg.hpp"
#include "avgtrack/matrix.hpp"
#include "avgtrack/signals.hpp"

namespace avgtrack {

enum class ControllerKind { static_gain, modified, adaptive };

/// Which per-edge nonlinearity drives the robust term.
enum class Nonlinearity {
    boundary_layer,  ///< continuous ω / (‖ω‖ + ε·e^{−φ·t_i})
    signum,          ///< discontinuous ω / ‖ω‖
};

/**
 * @brief Designed gains shared by all agents.
 *
 * K = −BᵀP and Gamma = PBBᵀP come from the Riccati solution; c1 and c2 are the
 * smallest admissible coupling strengths unless overridden; gamma_rate is
 * λ_min(Q)/λ_max(P), the guaranteed decay rate of the consensus Lyapunov function.
 */
struct GainSet {
    Mat P;
    Mat K;
    Mat Gamma;
    double c1 = 0.0;
    double c2 = 0.0;
    double lambda2 = 0.0;
    double f0 = 0.0;
    double gamma_rate = 0.0;
    double eps = 1.0;
    double phi = 0.0;
};

struct AdaptiveParams {
    double mu = 0.0;
    double nu = 0.0;
    double theta = 0.0;
    double chi = 0.0;
    double rho = 0.0;  ///< max{μϑ, νχ}
    bool feasible = false;  ///< rho < gamma_rate
};

inline Vec boundary_layer(std::span<const double> w, double t_local, double eps, double phi) {
    const double denom = norm2(w) + eps * std::exp(-phi * t_local);
    Vec out(w.begin(), w.end());
    if (denom == 0.0) return out;  // only reachable with w = 0 and a vanished layer
    for (double& v : out) v /= denom;
    return out;
}

inline Vec signum_dir(std::span<const double> w) {
    const double n = norm2(w);
    Vec out(w.begin(), w.end());
    if (n == 0.0) return out;
    for (double& v : out) v /= n;
    return out;
}

inline Vec edge_nonlinearity(Nonlinearity kind, std::span<const double> w, double t_local, double eps, double phi) {
    return kind == Nonlinearity::boundary_layer ? boundary_layer(w, t_local, eps, phi) : signum_dir(w);
}

/// ᾱ = 1/(2λ₂), β̄ = f₀(N−1)√N: the smallest admissible static coupling strengths.
struct CouplingBounds {
    double alpha_bar = 0.0;
    double beta_bar = 0.0;
};

inline CouplingBounds coupling_bounds(double lambda2_value, double f0, std::size_t agents) {
    const double n = static_cast<double>(agents);
    return {1.0 / (2.0 * lambda2_value), f0 * (n - 1.0) * std::sqrt(n)};
}

/**
 * Gain design for the static and modified laws (and the shared part of the
 * adaptive design). Checks connectivity (assumption 1) and stabilizability
 * (assumption 2) and fails with a design error naming the one that does not hold.
 */
inline GainSet design_gains(const Plant& plant, const Topology& topo, const InputFamily& inputs, const Mat& q, double eps,
                            double phi) {
    if (!(eps > 0.0)) fail(ErrorKind::input, "design_gains: eps must be positive");
    if (!(phi >= 0.0)) fail(ErrorKind::input, "design_gains: phi must be nonnegative");
    if (inputs.agent_count() != topo.vertex_count()) {
        fail(ErrorKind::input, "design_gains: " + std::to_string(inputs.agent_count()) + " inputs for " +
                                   std::to_string(topo.vertex_count()) + " agents");
    }
    if (inputs.channels() != plant.input_dim()) fail(ErrorKind::input, "design_gains: input width does not match B");
    if (!is_connected(topo)) fail(ErrorKind::design, "assumption 1 violated: communication graph is not connected");
    if (topo.vertex_count() < 2) fail(ErrorKind::design, "assumption 1 violated: at least two agents are required");
    if (!is_stabilizable(plant.A, plant.B)) fail(ErrorKind::design, "assumption 2 violated: (A, B) is not stabilizable");
    if (q.rows() != plant.state_dim() || !is_symmetric(q, 1e-12) || lambda_min(q) <= 0.0) {
        fail(ErrorKind::design, "design_gains: Q must be a symmetric positive definite " +
                                   std::to_string(plant.state_dim()) + "x" + std::to_string(plant.state_dim()) + " matrix");
    }

    GainSet g;
    g.P = solve_care(plant.A, plant.B, q);
    g.K = -(plant.B.transpose() * g.P);
    const Mat pb = g.P * plant.B;
    g.Gamma = symmetrize(pb * pb.transpose());
    g.lambda2 = lambda2(topo);
    g.f0 = input_bound(inputs);
    const auto bounds = coupling_bounds(g.lambda2, g.f0, topo.vertex_count());
    g.c1 = bounds.alpha_bar;
    g.c2 = bounds.beta_bar;
    g.gamma_rate = lambda_min(q) / lambda_max(g.P);
    g.eps = eps;
    g.phi = phi;
    return g;
}

/// One neighbor's share of u_i.
struct EdgeTerm {
    std::size_t neighbor = 0;
    std::size_t edge = 0;
    Vec linear;     ///< coupling-strength · K(x_i − x_j)
    Vec nonlinear;  ///< coupling-strength · h[K(x_i − x_j), t_i]
};

struct ControlResult {
    Vec u;
    std::vector<EdgeTerm> terms;
};

namespace detail {

inline Vec relative_state(const Mat& x, std::size_t i, std::size_t j) {
    Vec d(x.cols());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = x(i, k) - x(j, k);
    return d;
}

inline void add_scaled(Vec& acc, const Vec& v, double s) {
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += s * v[k];
}

inline void check_agent(const Mat& x, std::size_t i, const Topology& topo, const GainSet& g) {
    if (x.rows() != topo.vertex_count() || i >= x.rows())
        fail(ErrorKind::input, "control: agent index or state block does not match the topology");
    if (x.cols() != g.K.cols()) fail(ErrorKind::input, "control: state dimension does not match K");
}

}  // namespace detail

/// u_i = c₁·Σ_j K(x_i − x_j) + c₂·Σ_j h[K(x_i − x_j), t_i]; x holds one agent per row.
inline ControlResult static_control(std::size_t i, const Mat& x, const GainSet& g, double t_i, const Topology& topo,
                                    Nonlinearity nl = Nonlinearity::boundary_layer) {
    detail::check_agent(x, i, topo, g);
    ControlResult out{Vec(g.K.rows(), 0.0), {}};
    for (const auto& nb : topo.neighbors(i)) {
        const Vec w = g.K * detail::relative_state(x, i, nb.vertex);
        EdgeTerm term{nb.vertex, nb.edge, w, edge_nonlinearity(nl, w, t_i, g.eps, g.phi)};
        for (double& v : term.linear) v *= g.c1;
        for (double& v : term.nonlinear) v *= g.c2;
        detail::add_scaled(out.u, term.linear, 1.0);
        detail::add_scaled(out.u, term.nonlinear, 1.0);
        out.terms.push_back(std::move(term));
    }
    return out;
}

/// u_i = K·x_i + c₂·Σ_j h[K(x_i − x_j), t_i]. Works from any filter initial condition
/// provided A + BK is Hurwitz, which the Riccati design guarantees.
inline ControlResult modified_control(std::size_t i, const Mat& x, const GainSet& g, double t_i, const Topology& topo,
                                      Nonlinearity nl = Nonlinearity::boundary_layer) {
    detail::check_agent(x, i, topo, g);
    ControlResult out{g.K * x.row(i), {}};
    for (const auto& nb : topo.neighbors(i)) {
        const Vec w = g.K * detail::relative_state(x, i, nb.vertex);
        EdgeTerm term{nb.vertex, nb.edge, Vec(w.size(), 0.0), edge_nonlinearity(nl, w, t_i, g.eps, g.phi)};
        for (double& v : term.nonlinear) v *= g.c2;
        detail::add_scaled(out.u, term.nonlinear, 1.0);
        out.terms.push_back(std::move(term));
    }
    return out;
}

struct EdgeRate {
    std::size_t edge = 0;
    double alpha_dot = 0.0;
    double beta_dot = 0.0;
};

struct AdaptiveControlResult {
    Vec u;
    std::vector<EdgeTerm> terms;
    std::vector<EdgeRate> rates;
};

/**
 * @brief Adaptive edge law and the gain update rates seen from agent i.
 *
 * u_i = Σ_j α_ij·K(x_i − x_j) + Σ_j β_ij·h[K(x_i − x_j), t_i]
 * α̇_ij = μ[−ϑα_ij + (x_i − x_j)ᵀΓ(x_i − x_j)]
 * β̇_ij = ν[−χβ_ij + ωᵀh(ω)],  ω = K(x_i − x_j)
 *
 * With the boundary layer ωᵀh(ω) = ‖ω‖²/(‖ω‖ + ε·e^{−φt_i}); with the signum
 * nonlinearity it is ‖ω‖. alpha and beta are indexed by edge, so both
 * endpoints of an edge share one gain.
 */
inline AdaptiveControlResult adaptive_control(std::size_t i, const Mat& x, const GainSet& g, const AdaptiveParams& ap,
                                              std::span<const double> alpha, std::span<const double> beta, double t_i,
                                              const Topology& topo, Nonlinearity nl = Nonlinearity::boundary_layer) {
    detail::check_agent(x, i, topo, g);
    if (alpha.size() != topo.edge_count() || beta.size() != topo.edge_count())
        fail(ErrorKind::input, "adaptive_control: one alpha and one beta per edge are required");
    AdaptiveControlResult out{Vec(g.K.rows(), 0.0), {}, {}};
    for (const auto& nb : topo.neighbors(i)) {
        const Vec d = detail::relative_state(x, i, nb.vertex);
        const Vec w = g.K * d;
        const Vec h = edge_nonlinearity(nl, w, t_i, g.eps, g.phi);
        EdgeTerm term{nb.vertex, nb.edge, w, h};
        for (double& v : term.linear) v *= alpha[nb.edge];
        for (double& v : term.nonlinear) v *= beta[nb.edge];
        detail::add_scaled(out.u, term.linear, 1.0);
        detail::add_scaled(out.u, term.nonlinear, 1.0);
        out.terms.push_back(std::move(term));
        out.rates.push_back({nb.edge, ap.mu * (-ap.theta * alpha[nb.edge] + quadratic_form(g.Gamma, d, d)),
                             ap.nu * (-ap.chi * beta[nb.edge] + dot(w, h))});
    }
    return out;
}

/// Computes ϱ = max{μϑ, νχ} and whether ϱ < γ. In strict mode an infeasible choice is a design error.
inline AdaptiveParams design_adaptive_params(const GainSet& g, double mu, double nu, double theta, double chi,
                                             bool strict = false) {
    if (!(mu > 0.0 && nu > 0.0 && theta > 0.0 && chi > 0.0))
        fail(ErrorKind::input, "design_adaptive_params: mu, nu, theta, chi must all be positive");
    AdaptiveParams ap{mu, nu, theta, chi, std::max(mu * theta, nu * chi), false};
    ap.feasible = ap.rho < g.gamma_rate;
    if (strict && !ap.feasible) {
        fail(ErrorKind::design, "adaptive design infeasible: rho = " + std::to_string(ap.rho) +
                                    " is not below gamma = " + std::to_string(g.gamma_rate));
    }
    return ap;
}

/// Ultimate bound on ‖ξ‖ for the static law with a non-shrinking boundary layer (φ = 0).
inline double omega0_radius(const GainSet& g, const Topology& topo) {
    return std::sqrt(g.c2 * static_cast<double>(topo.degree_sum()) * g.eps / (g.gamma_rate * lambda_min(g.P)));
}

/// Level of V₂ below which the adaptive closed loop ultimately stays.
inline double omega1_level(const GainSet& g, const AdaptiveParams& ap, const Topology& topo) {
    const auto b = coupling_bounds(g.lambda2, g.f0, topo.vertex_count());
    const double delta = std::min({g.gamma_rate, ap.mu * ap.theta, ap.nu * ap.chi});
    const double per_pair = 0.5 * ap.theta * b.alpha_bar * b.alpha_bar + 0.5 * ap.chi * b.beta_bar * b.beta_bar;
    if (per_pair == 0.0) return 0.0;
    return static_cast<double>(topo.degree_sum()) * per_pair / delta;
}

/// Ultimate bound on ‖ξ‖ for the adaptive law; requires ϱ < γ.
inline double omega2_radius(const GainSet& g, const AdaptiveParams& ap, const Topology& topo) {
    if (!(ap.rho < g.gamma_rate)) {
        fail(ErrorKind::design, "omega2 undefined: rho = " + std::to_string(ap.rho) +
                                    " is not below gamma = " + std::to_string(g.gamma_rate));
    }
    const auto b = coupling_bounds(g.lambda2, g.f0, topo.vertex_count());
    const double num = static_cast<double>(topo.degree_sum()) *
                       (ap.theta * b.alpha_bar * b.alpha_bar + ap.chi * b.beta_bar * b.beta_bar);
    return std::sqrt(num / (2.0 * lambda_min(g.P) * (g.gamma_rate - ap.rho)));
}

struct OmegaRadii {
    double omega0 = 0.0;
    std::optional<double> omega2;
    std::optional<double> omega1_level;
};

inline OmegaRadii omega_radii(const GainSet& g, const std::optional<AdaptiveParams>& ap, const Topology& topo) {
    OmegaRadii r{omega0_radius(g, topo), std::nullopt, std::nullopt};
    if (ap) {
        r.omega1_level = omega1_level(g, *ap, topo);
        r.omega2 = omega2_radius(g, *ap, topo);
    }
    return r;
}

}  // namespace avgtrack
