#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "avgtrack/graph.hpp"
#include "avgtrack/linalg.hpp"
#include "avgtrack/matrix.hpp"

namespace testsupport {

using avgtrack::Mat;

inline Mat random_mat(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Mat m(rows, cols);
    for (double& v : m.data()) v = nd(rng);
    return m;
}

inline Mat random_symmetric(std::mt19937_64& rng, std::size_t n) {
    return avgtrack::symmetrize(random_mat(rng, n, n));
}

/// GᵀG + shift·I
inline Mat random_spd(std::mt19937_64& rng, std::size_t n, double shift = 0.1) {
    const Mat g = random_mat(rng, n, n);
    Mat q = g.transpose() * g;
    for (std::size_t i = 0; i < n; ++i) q(i, i) += shift;
    return avgtrack::symmetrize(q);
}

inline Eigen::MatrixXd to_eigen(const Mat& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
    return e;
}

/// Random connected graph: a random spanning tree plus extra edges with probability p.
inline avgtrack::Topology random_connected_graph(std::mt19937_64& rng, std::size_t n, double p = 0.3) {
    std::vector<avgtrack::Edge> edges;
    std::vector<std::vector<bool>> used(n, std::vector<bool>(n, false));
    for (std::size_t v = 1; v < n; ++v) {
        std::uniform_int_distribution<std::size_t> pick(0, v - 1);
        const std::size_t u = pick(rng);
        edges.push_back({u, v});
        used[u][v] = used[v][u] = true;
    }
    std::bernoulli_distribution coin(p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (!used[i][j] && coin(rng)) edges.push_back({i, j});
    return avgtrack::Topology(n, std::move(edges));
}

// ∫₀^∞ e^{Fᵀt} W e^{Ft} dt as the steady state of Ẋ = FᵀX + XF + W, X(0) = 0, by RK4 in Eigen.
inline Eigen::MatrixXd lyapunov_quadrature(const Eigen::MatrixXd& f, const Eigen::MatrixXd& w, double horizon, double h) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(f.rows(), f.cols());
    auto rhs = [&](const Eigen::MatrixXd& y) -> Eigen::MatrixXd { return f.transpose() * y + y * f + w; };
    const int steps = static_cast<int>(std::lround(horizon / h));
    for (int k = 0; k < steps; ++k) {
        const Eigen::MatrixXd k1 = rhs(x);
        const Eigen::MatrixXd k2 = rhs(x + 0.5 * h * k1);
        const Eigen::MatrixXd k3 = rhs(x + 0.5 * h * k2);
        const Eigen::MatrixXd k4 = rhs(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

inline Mat random_hurwitz(std::mt19937_64& rng, std::size_t n) {
    Mat f = random_spd(rng, n, 0.5) * -1.0;
    const Mat k = random_mat(rng, n, n, 0.5);
    f += k - k.transpose();  // skew part keeps the symmetric part, so the abscissa stays ≤ −0.5
    return f;
}

}  // namespace testsupport
