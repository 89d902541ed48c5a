#pragma once

#include "etdkf/core_model.hpp"

#include <algorithm>
#include <bit>
#include <ostream>
#include <queue>
#include <utility>
#include <vector>

namespace etdkf {

using Edge = std::pair<NodeId, NodeId>;

class Graph {
public:
    Graph() = default;

    Graph(std::size_t node_count, const std::vector<Edge>& edges) : adj_(node_count)
    {
        for (auto [a, b] : edges) {
            if (a >= node_count || b >= node_count)
                throw ConfigError("graph: edge (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                                  ") has an endpoint outside 1.." + std::to_string(node_count));
            if (a == b) throw ConfigError("graph: self-loop at node " + std::to_string(a + 1));
            if (a > b) std::swap(a, b);
            if (std::find(edges_.begin(), edges_.end(), Edge{a, b}) != edges_.end()) continue;
            edges_.emplace_back(a, b);
            adj_[a].insert(b);
            adj_[b].insert(a);
        }
    }

    std::size_t node_count() const { return adj_.size(); }
    const std::vector<Edge>& edges() const { return edges_; }

    const NodeSet& neighbors(NodeId i) const
    {
        if (i >= adj_.size()) throw ConfigError("graph: invalid node " + std::to_string(i + 1));
        return adj_[i];
    }

    bool has_edge(NodeId a, NodeId b) const { return a < adj_.size() && adj_[a].count(b) > 0; }

private:
    std::vector<NodeSet> adj_;
    std::vector<Edge> edges_; // stored with first < second
};

inline const NodeSet& neighbors(const Graph& g, NodeId i) { return g.neighbors(i); }

inline Matrix adjacency(const Graph& g)
{
    const auto N = static_cast<Eigen::Index>(g.node_count());
    Matrix W = Matrix::Zero(N, N);
    for (auto [a, b] : g.edges()) {
        W(a, b) = 1.0;
        W(b, a) = 1.0;
    }
    return W;
}

inline Matrix laplacian(const Graph& g)
{
    Matrix W = adjacency(g);
    Matrix L = -W;
    L.diagonal() = W.rowwise().sum();
    return L;
}

// Degree minus weighted adjacency. Weights need not be symmetric.
inline Matrix weighted_laplacian(const Matrix& W)
{
    Matrix L = -W;
    L.diagonal() += W.rowwise().sum();
    return L;
}

inline std::vector<NodeSet> connected_components(const Graph& g, const NodeSet& removed = {})
{
    const auto N = g.node_count();
    std::vector<char> seen(N, 0);
    for (auto r : removed)
        if (r < N) seen[r] = 1;
    std::vector<NodeSet> out;
    for (NodeId s = 0; s < N; ++s) {
        if (seen[s]) continue;
        NodeSet comp;
        std::queue<NodeId> q;
        q.push(s);
        seen[s] = 1;
        while (!q.empty()) {
            auto u = q.front();
            q.pop();
            comp.insert(u);
            for (auto v : g.neighbors(u))
                if (!seen[v]) {
                    seen[v] = 1;
                    q.push(v);
                }
        }
        out.push_back(std::move(comp));
    }
    return out;
}

inline bool is_connected(const Graph& g) { return connected_components(g).size() <= 1; }

inline bool is_vertex_cut(const Graph& g, const NodeSet& s)
{
    if (!is_connected(g)) throw ConfigError("is_vertex_cut: input graph is not connected");
    return connected_components(g, s).size() >= 2;
}

inline Graph induced_subgraph_edges(const Graph& g, const NodeSet& keep)
{
    std::vector<Edge> e;
    for (auto [a, b] : g.edges())
        if (keep.count(a) && keep.count(b)) e.emplace_back(a, b);
    return Graph(g.node_count(), e);
}

inline constexpr std::size_t max_potential_set_nodes = 20;

// Inclusion-minimal P with (A, C over V\P) not collectively observable.
// Being a potential set is upward closed, so P is minimal iff every
// P minus one member is not a potential set.
inline std::vector<NodeSet> find_minimal_potential_sets(const Graph& g, const ProcessModel& model,
                                                        std::span<const SensorModel> sensors)
{
    const auto N = g.node_count();
    if (N > max_potential_set_nodes)
        throw ConfigError("find_minimal_potential_sets: " + std::to_string(N) + " nodes exceeds the limit of " +
                          std::to_string(max_potential_set_nodes));
    if (sensors.size() != N) throw ConfigError("find_minimal_potential_sets: sensor count differs from node count");

    const std::uint32_t full = (1u << N) - 1u;
    std::vector<signed char> memo(std::size_t{1} << N, -1);
    auto potential = [&](std::uint32_t mask) {
        auto& m = memo[mask];
        if (m < 0) {
            NodeSet rest;
            for (NodeId i = 0; i < N; ++i)
                if (!(mask >> i & 1u)) rest.insert(i);
            m = rest.empty() ? 1 : !is_collectively_observable(model, sensors, rest, N);
        }
        return m == 1;
    };

    std::vector<std::uint32_t> masks;
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
        if (!potential(mask)) continue;
        bool minimal = true;
        for (NodeId i = 0; i < N && minimal; ++i)
            if ((mask >> i & 1u) && potential(mask & ~(1u << i))) minimal = false;
        if (minimal) masks.push_back(mask);
        if (mask == full) break;
    }
    std::sort(masks.begin(), masks.end(), [](auto a, auto b) {
        const int pa = std::popcount(a), pb = std::popcount(b);
        return pa != pb ? pa < pb : a < b;
    });
    std::vector<NodeSet> out;
    for (auto mask : masks) {
        NodeSet s;
        for (NodeId i = 0; i < N; ++i)
            if (mask >> i & 1u) s.insert(i);
        out.push_back(std::move(s));
    }
    return out;
}

inline void write_adjacency_csv(const Graph& g, std::ostream& os)
{
    const auto N = g.node_count();
    os << "node";
    for (NodeId j = 0; j < N; ++j) os << ',' << j + 1;
    os << '\n';
    for (NodeId i = 0; i < N; ++i) {
        os << i + 1;
        for (NodeId j = 0; j < N; ++j) os << ',' << (g.has_edge(i, j) ? 1 : 0);
        os << '\n';
    }
}

} // namespace etdkf
