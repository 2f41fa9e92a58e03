#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace avgtrack {

/// Scratch registers for rk4_step, reused across steps to avoid reallocation.
struct Rk4Workspace {
    std::vector<double> k1, k2, k3, k4, stage;

    void resize(std::size_t n) {
        k1.resize(n);
        k2.resize(n);
        k3.resize(n);
        k4.resize(n);
        stage.resize(n);
    }
};

/**
 * Classical fourth-order Runge–Kutta step, in place.
 *
 * `rhs(t, y, dydt)` writes the derivative of y at time t into dydt. The
 * update is a fixed sequence of floating-point operations, so identical
 * inputs give bit-identical results.
 */
template <typename Rhs>
void rk4_step(Rhs&& rhs, double t, std::vector<double>& y, double h, Rk4Workspace& ws) {
    const std::size_t n = y.size();
    ws.resize(n);

    rhs(t, std::span<const double>(y), std::span<double>(ws.k1));
    for (std::size_t k = 0; k < n; ++k) ws.stage[k] = y[k] + 0.5 * h * ws.k1[k];
    rhs(t + 0.5 * h, std::span<const double>(ws.stage), std::span<double>(ws.k2));
    for (std::size_t k = 0; k < n; ++k) ws.stage[k] = y[k] + 0.5 * h * ws.k2[k];
    rhs(t + 0.5 * h, std::span<const double>(ws.stage), std::span<double>(ws.k3));
    for (std::size_t k = 0; k < n; ++k) ws.stage[k] = y[k] + h * ws.k3[k];
    rhs(t + h, std::span<const double>(ws.stage), std::span<double>(ws.k4));

    for (std::size_t k = 0; k < n; ++k) y[k] += h / 6.0 * (ws.k1[k] + 2.0 * ws.k2[k] + 2.0 * ws.k3[k] + ws.k4[k]);
}

}  // namespace avgtrack
