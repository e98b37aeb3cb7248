#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "dcvcd/core.hpp"

namespace dcvcd {

/// Cosine similarity clamped to [-1, 1]. Zero vectors have no direction and are rejected.
inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw Error("cosine_similarity: dimension mismatch");
    double nu = norm(u);
    double nv = norm(v);
    if (nu == 0.0 || nv == 0.0) throw Error("cosine_similarity: zero vector");
    return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

struct Edge {
    NodeId u = 0;
    NodeId v = 0;
    double weight = 0.0;
};

// =============================================================================
// WeightedGraph
// =============================================================================

/// Undirected weighted graph over a subset of dataset rows.
///
/// Nodes are addressed two ways: by dataset row index (`NodeId`) at the API
/// boundary, and by local position in `nodes()` inside the algorithms. Adjacency
/// lists hold local indices, are sorted by neighbor, and are symmetric with
/// bit-identical weights. There are no self-loops.
class WeightedGraph {
public:
    struct Neighbor {
        std::size_t node;  // local index
        double weight;
    };

    WeightedGraph() = default;

    /// Builds from edges given in dataset indices. Duplicate edges are rejected.
    static WeightedGraph from_edges(NodeSet nodes, const std::vector<Edge>& edges) {
        WeightedGraph g;
        g.nodes_ = sorted_unique(std::move(nodes));
        g.adj_.assign(g.nodes_.size(), {});
        for (std::size_t i = 0; i < g.nodes_.size(); ++i) g.index_.emplace(g.nodes_[i], i);
        for (const auto& e : edges) {
            if (e.u == e.v) throw Error("graph: self-loop on node " + std::to_string(e.u));
            if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
                throw Error("graph: edge weights must be positive and finite");
            }
            std::size_t a = g.local(e.u);
            std::size_t b = g.local(e.v);
            g.adj_[a].push_back({b, e.weight});
            g.adj_[b].push_back({a, e.weight});
        }
        g.finalize();
        return g;
    }

    const NodeSet& nodes() const noexcept { return nodes_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t edge_count() const noexcept { return edge_count_; }
    double total_weight() const noexcept { return total_weight_; }

    const std::vector<Neighbor>& neighbors(std::size_t local_index) const { return adj_[local_index]; }

    bool contains(NodeId v) const { return index_.count(v) != 0; }

    std::size_t local(NodeId v) const {
        auto it = index_.find(v);
        if (it == index_.end()) throw Error("graph: node " + std::to_string(v) + " is not in the graph");
        return it->second;
    }

    /// Sum of incident edge weights, by local index.
    double degree_local(std::size_t i) const { return degrees_[i]; }

    /// Edges with u < v in dataset indices, ordered by (u, v).
    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        out.reserve(edge_count_);
        for (std::size_t i = 0; i < adj_.size(); ++i) {
            for (const auto& nb : adj_[i]) {
                if (i < nb.node) out.push_back({nodes_[i], nodes_[nb.node], nb.weight});
            }
        }
        return out;
    }

private:
    void finalize() {
        degrees_.assign(adj_.size(), 0.0);
        total_weight_ = 0.0;
        edge_count_ = 0;
        for (std::size_t i = 0; i < adj_.size(); ++i) {
            auto& list = adj_[i];
            std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
            for (std::size_t j = 1; j < list.size(); ++j) {
                if (list[j - 1].node == list[j].node) throw Error("graph: duplicate edge");
            }
            for (const auto& nb : list) {
                degrees_[i] += nb.weight;
                if (i < nb.node) {
                    total_weight_ += nb.weight;
                    ++edge_count_;
                }
            }
        }
    }

    NodeSet nodes_;
    std::vector<std::vector<Neighbor>> adj_;
    std::unordered_map<NodeId, std::size_t> index_;
    std::vector<double> degrees_;
    double total_weight_ = 0.0;
    std::size_t edge_count_ = 0;
};

/// Rows scaled to unit length; used for similarity only, never for distances.
inline Matrix normalized_rows(const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = out.row(i);
        double n = norm(r);
        if (n == 0.0) throw Error("cosine similarity undefined: row " + std::to_string(i) + " is a zero vector");
        for (double& x : r) x /= n;
    }
    return out;
}

/// Similarity of two unit-length rows, clamped like cosine_similarity.
inline double unit_similarity(std::span<const double> a, std::span<const double> b) {
    return std::clamp(dot(a, b), -1.0, 1.0);
}

/// Similarity graph over `subset`, reading rows of a matrix whose rows are
/// already unit length (see normalized_rows). Pairs are evaluated in row
/// blocks; each unordered pair is computed once so both directions carry the
/// same weight.
inline WeightedGraph build_graph_unit(const Matrix& unit, const NodeSet& subset, double threshold) {
    if (subset.empty()) throw Error("build_graph: empty node subset");
    if (!(threshold >= -1.0 && threshold < 1.0)) throw Error("build_graph: threshold must lie in [-1, 1)");
    NodeSet nodes = sorted_unique(subset);
    if (nodes.back() >= unit.rows()) throw Error("build_graph: node index out of range");
    constexpr std::size_t kBlock = 64;
    const double cutoff = std::max(threshold, 0.0);
    const std::size_t n = nodes.size();
    std::vector<Edge> edges;
    for (std::size_t bi = 0; bi < n; bi += kBlock) {
        std::size_t ei = std::min(n, bi + kBlock);
        for (std::size_t bj = bi; bj < n; bj += kBlock) {
            std::size_t ej = std::min(n, bj + kBlock);
            for (std::size_t i = bi; i < ei; ++i) {
                auto ri = unit.row(nodes[i]);
                for (std::size_t j = std::max(bj, i + 1); j < ej; ++j) {
                    double s = unit_similarity(ri, unit.row(nodes[j]));
                    if (s > threshold && s > cutoff) edges.push_back({nodes[i], nodes[j], s});
                }
            }
        }
    }
    return WeightedGraph::from_edges(std::move(nodes), edges);
}

/// Similarity graph over `subset`: edge (i, j) iff cos(i, j) > threshold.
///
/// Only positive similarities become edges, so for negative thresholds the
/// pairs with cos <= 0 are still excluded (weights live in (0, 1]).
/// Isolated nodes stay in `nodes()`.
inline WeightedGraph build_graph(const Dataset& data, const NodeSet& subset, double threshold) {
    if (subset.empty()) throw Error("build_graph: empty node subset");
    NodeSet nodes = sorted_unique(subset);
    if (nodes.back() >= data.size()) throw Error("build_graph: node index out of range");
    // Normalize only the rows we need; other rows stay zero and are never read.
    Matrix unit(data.size(), data.dim());
    for (NodeId v : nodes) {
        auto src = data.row(v);
        double n = norm(src);
        if (n == 0.0) throw Error("build_graph: row " + std::to_string(v) + " is a zero vector");
        auto dst = unit.row(v);
        for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] / n;
    }
    return build_graph_unit(unit, nodes, threshold);
}

/// Weighted degree of dataset node `v`.
inline double weighted_degree(const WeightedGraph& g, NodeId v) { return g.degree_local(g.local(v)); }

/// Mean weighted degree over `members`, with degrees taken in the subgraph induced by `members`.
inline double avg_degree(const WeightedGraph& g, const NodeSet& members) {
    if (members.empty()) throw Error("avg_degree: empty member set");
    NodeSet set = sorted_unique(members);
    std::vector<char> in(g.node_count(), 0);
    for (NodeId v : set) in[g.local(v)] = 1;
    double sum = 0.0;
    for (NodeId v : set) {
        for (const auto& nb : g.neighbors(g.local(v))) {
            if (in[nb.node]) sum += nb.weight;
        }
    }
    return sum / static_cast<double>(set.size());
}

/// Debug export: one `u v weight` line per edge, dataset row indices, u < v.
inline void write_edge_list(std::ostream& out, const WeightedGraph& g) {
    char buf[64];
    for (const auto& e : g.edges()) {
        std::snprintf(buf, sizeof buf, "%.17g", e.weight);
        out << e.u << ' ' << e.v << ' ' << buf << '\n';
    }
}

inline void write_edge_list(const std::string& path, const WeightedGraph& g) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_edge_list(out, g);
}

/// Reads `u v weight` lines (blank lines and `#` comments skipped).
/// The node set is every endpoint mentioned.
inline WeightedGraph read_edge_list(std::istream& in) {
    std::vector<Edge> edges;
    NodeSet nodes;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        long long u = -1;
        long long v = -1;
        double w = 0.0;
        std::string extra;
        if (!(ss >> u >> v >> w) || (ss >> extra) || u < 0 || v < 0) {
            throw Error("edge list: malformed line " + std::to_string(lineno));
        }
        edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v), w});
        nodes.push_back(static_cast<NodeId>(u));
        nodes.push_back(static_cast<NodeId>(v));
    }
    return WeightedGraph::from_edges(std::move(nodes), edges);
}

}  // namespace dcvcd
