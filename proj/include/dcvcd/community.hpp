#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <numeric>
#include <string>
#include <vector>

#include "dcvcd/core.hpp"
#include "dcvcd/graph.hpp"
#include "dcvcd/random.hpp"

namespace dcvcd {

enum class Algorithm { leiden, louvain };

inline const char* to_string(Algorithm a) { return a == Algorithm::leiden ? "leiden" : "louvain"; }

struct DetectionResult {
    Partition partition;
    double modularity = 0.0;
    Algorithm algorithm = Algorithm::leiden;
    int passes = 0;
    /// Modularity after every local-moving phase, in execution order, then the final value.
    std::vector<double> pass_modularity;
};

/// Q = (1/2W) Σ_ij [w_ij - k_i k_j / 2W] δ(c_i, c_j), evaluated per community as
/// Σ_c [I_c / W - (K_c / 2W)^2] with I_c the intra-community weight.
/// Zero for an edgeless graph.
inline double modularity(const WeightedGraph& g, const Partition& p) {
    if (p.nodes() != g.nodes()) throw Error("modularity: partition does not cover exactly the graph's nodes");
    const double W = g.total_weight();
    if (W <= 0.0) return 0.0;
    std::vector<int> comm(g.node_count(), -1);
    for (std::size_t c = 0; c < p.size(); ++c) {
        for (NodeId v : p.communities()[c].members) comm[g.local(v)] = static_cast<int>(c);
    }
    std::vector<double> internal(p.size(), 0.0);
    std::vector<double> total(p.size(), 0.0);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        total[comm[i]] += g.degree_local(i);
        for (const auto& nb : g.neighbors(i)) {
            if (i < nb.node && comm[i] == comm[nb.node]) internal[comm[i]] += nb.weight;
        }
    }
    double q = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
        double frac = total[c] / (2.0 * W);
        q += internal[c] / W - frac * frac;
    }
    return q;
}

/// True iff the subgraph of `g` induced by the members is connected.
inline bool is_internally_connected(const Community& c, const WeightedGraph& g) {
    if (c.members.size() <= 1) return true;
    std::vector<char> in(g.node_count(), 0);
    for (NodeId v : c.members) in[g.local(v)] = 1;
    std::vector<char> seen(g.node_count(), 0);
    std::vector<std::size_t> stack{g.local(c.members.front())};
    seen[stack.back()] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        std::size_t v = stack.back();
        stack.pop_back();
        for (const auto& nb : g.neighbors(v)) {
            if (in[nb.node] && !seen[nb.node]) {
                seen[nb.node] = 1;
                ++reached;
                stack.push_back(nb.node);
            }
        }
    }
    return reached == c.members.size();
}

namespace detail {

/// Multilevel working graph: aggregate nodes carry a self-loop weight for the
/// edges collapsed inside them. degree[i] = Σ_j w_ij + 2 * self_loop[i].
struct LevelGraph {
    struct Arc {
        int node;
        double weight;
    };
    std::vector<std::vector<Arc>> adj;
    std::vector<double> self_loop;
    std::vector<double> degree;
    double two_w = 0.0;

    int size() const { return static_cast<int>(adj.size()); }

    static LevelGraph from(const WeightedGraph& g) {
        LevelGraph lg;
        lg.adj.resize(g.node_count());
        lg.self_loop.assign(g.node_count(), 0.0);
        lg.degree.assign(g.node_count(), 0.0);
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            for (const auto& nb : g.neighbors(i)) lg.adj[i].push_back({static_cast<int>(nb.node), nb.weight});
            lg.degree[i] = g.degree_local(i);
            lg.two_w += lg.degree[i];
        }
        return lg;
    }

    double quality(const std::vector<int>& comm) const {
        if (two_w <= 0.0) return 0.0;
        int nc = comm.empty() ? 0 : *std::max_element(comm.begin(), comm.end()) + 1;
        std::vector<double> internal(nc, 0.0);
        std::vector<double> total(nc, 0.0);
        for (int i = 0; i < size(); ++i) {
            total[comm[i]] += degree[i];
            internal[comm[i]] += 2.0 * self_loop[i];
            for (const auto& a : adj[i]) {
                if (comm[a.node] == comm[i]) internal[comm[i]] += a.weight;
            }
        }
        double q = 0.0;
        for (int c = 0; c < nc; ++c) {
            double frac = total[c] / two_w;
            q += internal[c] / two_w - frac * frac;
        }
        return q;
    }
};

/// Renumbers labels densely in order of first appearance; returns the count.
inline int compact(std::vector<int>& labels) {
    std::vector<int> remap;
    int next = 0;
    for (int& l : labels) {
        if (l >= static_cast<int>(remap.size())) remap.resize(l + 1, -1);
        if (remap[l] < 0) remap[l] = next++;
        l = remap[l];
    }
    return next;
}

/// Queue-driven local moving. A node moves only on a strictly better gain,
/// so equal-gain alternatives keep it where it is. Returns the move count.
inline std::size_t move_nodes(const LevelGraph& g, std::vector<int>& comm, Rng& rng) {
    const int n = g.size();
    if (n == 0 || g.two_w <= 0.0) return 0;
    const double two_w = g.two_w;
    // Gains are compared in edge-weight units; this tolerance is ~1e-13 in Q.
    const double eps = 1e-13 * two_w;

    std::vector<double> comm_total(n, 0.0);
    std::vector<int> comm_size(n, 0);
    for (int v = 0; v < n; ++v) {
        comm_total[comm[v]] += g.degree[v];
        ++comm_size[comm[v]];
    }
    std::vector<int> empty;
    for (int c = n - 1; c >= 0; --c) {
        if (comm_size[c] == 0) empty.push_back(c);
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order.begin(), order.end(), rng);
    std::deque<int> queue(order.begin(), order.end());
    std::vector<char> queued(n, 1);

    std::vector<double> link(n, 0.0);
    std::vector<int> touched;
    std::size_t moves = 0;

    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        queued[v] = 0;

        const int old = comm[v];
        const double kv = g.degree[v];
        comm_total[old] -= kv;
        --comm_size[old];

        touched.clear();
        for (const auto& a : g.adj[v]) {
            int c = comm[a.node];
            if (link[c] == 0.0) touched.push_back(c);
            link[c] += a.weight;
        }

        int best = old;
        double best_gain = link[old] - kv * comm_total[old] / two_w;
        for (int c : touched) {
            if (c == old) continue;
            double gain = link[c] - kv * comm_total[c] / two_w;
            if (gain > best_gain + eps) {
                best = c;
                best_gain = gain;
            }
        }
        if (comm_size[old] > 0 && 0.0 > best_gain + eps && !empty.empty()) {
            best = empty.back();
            best_gain = 0.0;
        }
        for (int c : touched) link[c] = 0.0;
        link[old] = 0.0;

        if (best != old) {
            if (!empty.empty() && best == empty.back()) empty.pop_back();
            if (comm_size[old] == 0) empty.push_back(old);
            ++moves;
            for (const auto& a : g.adj[v]) {
                if (!queued[a.node] && comm[a.node] != best) {
                    queued[a.node] = 1;
                    queue.push_back(a.node);
                }
            }
        }
        comm[v] = best;
        comm_total[best] += kv;
        ++comm_size[best];
    }
    return moves;
}

/// Leiden refinement: inside each community, start from singletons and let
/// well-connected singleton nodes join a well-connected refined cluster they
/// have edges to, greedily by modularity gain. Every refined cluster is
/// therefore connected and nested in one community.
inline std::vector<int> refine(const LevelGraph& g, const std::vector<int>& comm, Rng& rng) {
    const int n = g.size();
    const double two_w = g.two_w;
    std::vector<int> ref(n);
    std::iota(ref.begin(), ref.end(), 0);
    if (two_w <= 0.0) return ref;

    std::vector<double> comm_total(n, 0.0);
    for (int v = 0; v < n; ++v) comm_total[comm[v]] += g.degree[v];

    // Weight from each refined cluster to the rest of its community.
    std::vector<double> external(n, 0.0);
    std::vector<double> cluster_total(n, 0.0);
    std::vector<int> cluster_size(n, 1);
    for (int v = 0; v < n; ++v) {
        cluster_total[v] = g.degree[v];
        for (const auto& a : g.adj[v]) {
            if (comm[a.node] == comm[v]) external[v] += a.weight;
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order.begin(), order.end(), rng);

    std::vector<double> link(n, 0.0);
    std::vector<int> touched;
    for (int v : order) {
        if (cluster_size[ref[v]] != 1) continue;
        const double kv = g.degree[v];
        const double ks = comm_total[comm[v]];
        if (external[v] < kv * (ks - kv) / two_w) continue;

        touched.clear();
        for (const auto& a : g.adj[v]) {
            if (comm[a.node] != comm[v]) continue;
            int r = ref[a.node];
            if (r == ref[v]) continue;
            if (link[r] == 0.0) touched.push_back(r);
            link[r] += a.weight;
        }
        int best = -1;
        double best_gain = 0.0;
        for (int r : touched) {
            double kr = cluster_total[r];
            if (external[r] < kr * (ks - kr) / two_w) continue;
            double gain = link[r] - kv * kr / two_w;
            if (gain >= 0.0 && (best < 0 || gain > best_gain)) {
                best = r;
                best_gain = gain;
            }
        }
        if (best >= 0) {
            int own = ref[v];
            external[best] += external[own] - 2.0 * link[best];
            cluster_total[best] += kv;
            ++cluster_size[best];
            cluster_size[own] = 0;
            ref[v] = best;
        }
        for (int r : touched) link[r] = 0.0;
    }
    compact(ref);
    return ref;
}

/// Collapses each cluster of `labels` (dense, `count` clusters) into one node.
inline LevelGraph aggregate(const LevelGraph& g, const std::vector<int>& labels, int count) {
    LevelGraph out;
    out.adj.resize(count);
    out.self_loop.assign(count, 0.0);
    out.degree.assign(count, 0.0);
    out.two_w = g.two_w;
    std::vector<double> acc(count, 0.0);
    std::vector<int> touched;
    std::vector<std::vector<int>> members(count);
    for (int v = 0; v < g.size(); ++v) members[labels[v]].push_back(v);
    for (int c = 0; c < count; ++c) {
        touched.clear();
        for (int v : members[c]) {
            out.degree[c] += g.degree[v];
            out.self_loop[c] += g.self_loop[v];
            for (const auto& a : g.adj[v]) {
                int d = labels[a.node];
                if (d == c) {
                    out.self_loop[c] += 0.5 * a.weight;  // each internal edge is seen from both ends
                } else {
                    if (acc[d] == 0.0) touched.push_back(d);
                    acc[d] += a.weight;
                }
            }
        }
        std::sort(touched.begin(), touched.end());
        for (int d : touched) {
            out.adj[c].push_back({d, acc[d]});
            acc[d] = 0.0;
        }
    }
    return out;
}

/// Splits every community into its connected components; never lowers Q.
inline void split_disconnected(const LevelGraph& g, std::vector<int>& comm) {
    const int n = g.size();
    std::vector<int> out(n, -1);
    int next = 0;
    std::vector<int> stack;
    for (int s = 0; s < n; ++s) {
        if (out[s] >= 0) continue;
        out[s] = next;
        stack.push_back(s);
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (const auto& a : g.adj[v]) {
                if (out[a.node] < 0 && comm[a.node] == comm[s]) {
                    out[a.node] = next;
                    stack.push_back(a.node);
                }
            }
        }
        ++next;
    }
    comm = std::move(out);
}

/// One multilevel Leiden (refine = true) or Louvain (refine = false) run
/// starting from `membership` on the base graph. Appends Q after each
/// local-moving phase to `trace`.
inline std::vector<int> multilevel(const LevelGraph& base, std::vector<int> membership, bool use_refinement,
                                   Rng& rng, std::vector<double>& trace, int& passes) {
    LevelGraph g = base;
    std::vector<int> comm = membership;
    compact(comm);
    std::vector<int> node_of(base.size());  // base node -> aggregate node
    std::iota(node_of.begin(), node_of.end(), 0);

    auto flatten = [&] {
        std::vector<int> flat(base.size());
        for (int b = 0; b < base.size(); ++b) flat[b] = comm[node_of[b]];
        return flat;
    };

    for (;;) {
        std::size_t moves = move_nodes(g, comm, rng);
        int count = compact(comm);
        ++passes;
        trace.push_back(base.quality(flatten()));
        if (count == g.size()) break;

        std::vector<int> groups;
        int group_count = 0;
        if (use_refinement) {
            groups = refine(g, comm, rng);
            group_count = *std::max_element(groups.begin(), groups.end()) + 1;
            if (group_count == g.size() && moves == 0) break;
        } else {
            if (moves == 0) break;
            groups = comm;
            group_count = count;
        }

        LevelGraph next = aggregate(g, groups, group_count);
        std::vector<int> next_comm(group_count, 0);
        for (int v = 0; v < g.size(); ++v) next_comm[groups[v]] = comm[v];
        for (int& a : node_of) a = groups[a];
        g = std::move(next);
        comm = std::move(next_comm);
    }
    return flatten();
}

inline DetectionResult finish(const WeightedGraph& wg, const LevelGraph& base, std::vector<int> membership,
                              Algorithm algo, int passes, std::vector<double> trace) {
    std::vector<int> labels = std::move(membership);
    compact(labels);
    DetectionResult r;
    r.partition = Partition::from_labels(wg.nodes(), labels);
    r.modularity = modularity(wg, r.partition);
    r.algorithm = algo;
    r.passes = passes;
    r.pass_modularity = std::move(trace);
    r.pass_modularity.push_back(r.modularity);
    (void)base;
    return r;
}

}  // namespace detail

/// Independent Leiden starts per call; the best modularity wins.
inline constexpr int kLeidenRestarts = 8;

namespace detail {

struct LeidenRun {
    std::vector<int> membership;
    std::vector<double> trace;
    int passes = 0;
    double quality = 0.0;
};

/// One start from singletons: multilevel passes repeated from the previous
/// result while Q improves by more than 1e-12.
inline LeidenRun leiden_run(const LevelGraph& base, Rng& rng) {
    LeidenRun run;
    run.membership.resize(base.size());
    std::iota(run.membership.begin(), run.membership.end(), 0);
    run.quality = base.quality(run.membership);
    for (int round = 0; round < 100; ++round) {
        std::vector<int> next = multilevel(base, run.membership, true, rng, run.trace, run.passes);
        double q = base.quality(next);
        bool improved = q > run.quality + 1e-12;
        if (q >= run.quality) {
            run.membership = std::move(next);
            run.quality = std::max(run.quality, q);
        }
        if (!improved) break;
    }
    return run;
}

}  // namespace detail

/// Leiden community detection maximizing modularity (resolution 1).
///
/// Each start runs multilevel passes (local moving, refinement, aggregation on
/// the refined partition) and repeats them from its previous result while Q
/// improves. `restarts` starts share one seeded stream; the first start with
/// the highest Q is kept, and its pass trace is reported. A final split into
/// connected components makes every community internally connected.
inline DetectionResult leiden(const WeightedGraph& g, std::uint64_t seed, int restarts = kLeidenRestarts) {
    if (restarts < 1) throw Error("leiden: restarts must be positive");
    detail::LevelGraph base = detail::LevelGraph::from(g);
    if (base.size() == 0) return detail::finish(g, base, {}, Algorithm::leiden, 0, {});

    Rng rng(seed);
    detail::LeidenRun best = detail::leiden_run(base, rng);
    // Edgeless graphs have nothing to explore.
    for (int r = 1; r < restarts && base.two_w > 0.0; ++r) {
        detail::LeidenRun run = detail::leiden_run(base, rng);
        if (run.quality > best.quality + 1e-12) best = std::move(run);
    }
    detail::split_disconnected(base, best.membership);
    return detail::finish(g, base, std::move(best.membership), Algorithm::leiden, best.passes, std::move(best.trace));
}

/// Classic Louvain: local moving then aggregation by community, until a level
/// makes no moves. No refinement, hence no connectivity guarantee.
inline DetectionResult louvain(const WeightedGraph& g, std::uint64_t seed) {
    detail::LevelGraph base = detail::LevelGraph::from(g);
    const int n = base.size();
    std::vector<int> membership(n);
    std::iota(membership.begin(), membership.end(), 0);
    std::vector<double> trace;
    int passes = 0;
    if (n == 0) return detail::finish(g, base, membership, Algorithm::louvain, passes, trace);
    Rng rng(seed);
    membership = detail::multilevel(base, membership, false, rng, trace, passes);
    return detail::finish(g, base, membership, Algorithm::louvain, passes, trace);
}

inline DetectionResult detect(const WeightedGraph& g, Algorithm algo, std::uint64_t seed) {
    return algo == Algorithm::leiden ? leiden(g, seed) : louvain(g, seed);
}

}  // namespace dcvcd
