#pragma once

#include <cstddef>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "avgtrack/error.hpp"
#include "avgtrack/linalg.hpp"
#include "avgtrack/matrix.hpp"

namespace avgtrack {

/// One stored edge. `tail` carries +1 in the incidence matrix, `head` carries −1.
struct Edge {
    std::size_t tail = 0;
    std::size_t head = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// A neighbor j of some vertex i, with the index of the edge that joins them.
struct Neighbor {
    std::size_t vertex = 0;
    std::size_t edge = 0;
};

/**
 * @brief Undirected simple graph on vertices 0..N-1.
 *
 * Edge orientation is storage order. Quantities derived from it (Laplacian,
 * λ₂) do not depend on that orientation.
 */
class Topology {
public:
    Topology(std::size_t vertex_count, std::vector<Edge> edges)
        : vertex_count_(vertex_count), edges_(std::move(edges)), adjacency_(vertex_count) {
        if (vertex_count_ == 0) fail(ErrorKind::input, "topology: vertex count must be positive");
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            const auto [i, j] = edges_[e];
            if (i >= vertex_count_ || j >= vertex_count_) {
                fail(ErrorKind::input, "topology: edge (" + std::to_string(i) + "," + std::to_string(j) +
                                           ") has an endpoint outside 0.." + std::to_string(vertex_count_ - 1));
            }
            if (i == j) fail(ErrorKind::input, "topology: self-loop at vertex " + std::to_string(i));
            if (!seen.emplace(std::min(i, j), std::max(i, j)).second) {
                fail(ErrorKind::input, "topology: duplicate edge (" + std::to_string(i) + "," + std::to_string(j) + ")");
            }
            adjacency_[i].push_back({j, e});
            adjacency_[j].push_back({i, e});
        }
    }

    std::size_t vertex_count() const noexcept { return vertex_count_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const std::vector<Neighbor>& neighbors(std::size_t i) const { return adjacency_.at(i); }
    std::size_t degree(std::size_t i) const { return adjacency_.at(i).size(); }

    /// Σ_i |N_i| = 2|E|.
    std::size_t degree_sum() const noexcept { return 2 * edges_.size(); }

    friend bool operator==(const Topology& a, const Topology& b) {
        return a.vertex_count_ == b.vertex_count_ && a.edges_ == b.edges_;
    }

private:
    std::size_t vertex_count_;
    std::vector<Edge> edges_;
    std::vector<std::vector<Neighbor>> adjacency_;
};

/// N x |E| incidence matrix: column e has +1 at the tail, −1 at the head.
inline Mat incidence(const Topology& t) {
    Mat d(t.vertex_count(), t.edge_count());
    for (std::size_t e = 0; e < t.edge_count(); ++e) {
        d(t.edges()[e].tail, e) = 1.0;
        d(t.edges()[e].head, e) = -1.0;
    }
    return d;
}

/// Degree-minus-adjacency Laplacian.
inline Mat laplacian(const Topology& t) {
    Mat l(t.vertex_count(), t.vertex_count());
    for (const auto& [i, j] : t.edges()) {
        l(i, i) += 1.0;
        l(j, j) += 1.0;
        l(i, j) -= 1.0;
        l(j, i) -= 1.0;
    }
    return l;
}

inline bool is_connected(const Topology& t) {
    std::vector<bool> visited(t.vertex_count(), false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    visited[0] = true;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        const std::size_t v = frontier.front();
        frontier.pop();
        for (const auto& nb : t.neighbors(v)) {
            if (visited[nb.vertex]) continue;
            visited[nb.vertex] = true;
            ++reached;
            frontier.push(nb.vertex);
        }
    }
    return reached == t.vertex_count();
}

/// Algebraic connectivity: the second-smallest Laplacian eigenvalue.
/// A single vertex has no nonzero eigenvalue and is rejected like a disconnected graph.
inline double lambda2(const Topology& t) {
    if (!is_connected(t)) fail(ErrorKind::design, "lambda2: graph is disconnected, algebraic connectivity is zero");
    if (t.vertex_count() < 2) fail(ErrorKind::design, "lambda2: a single vertex has no nonzero Laplacian eigenvalue");
    return sym_eigen(laplacian(t)).values[1];
}

/// M = I − (1/N)·11ᵀ
inline Mat centering_matrix(std::size_t n) {
    if (n == 0) fail(ErrorKind::input, "centering_matrix: N must be positive");
    Mat m(n, n, -1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) m(i, i) += 1.0;
    return m;
}

/// Undirected cycle 0-1-...-(N-1)-0 with the chord (0, N/2): the six-agent
/// acceptance graph for N = 6. Below four vertices the chord would repeat a
/// ring edge and is dropped; N = 2 is a single edge.
inline Topology chorded_ring(std::size_t n) {
    std::vector<Edge> edges;
    if (n == 2) edges.push_back({0, 1});
    if (n >= 3)
        for (std::size_t i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n});
    if (n >= 4) edges.push_back({0, n / 2});
    return Topology(n, std::move(edges));
}

inline Topology complete_graph(std::size_t n) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) edges.push_back({i, j});
    return Topology(n, std::move(edges));
}

}  // namespace avgtrack
