#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dcvcd/community.hpp"
#include "dcvcd/core.hpp"
#include "dcvcd/graph.hpp"
#include "dcvcd/random.hpp"

namespace dcvcd {

struct MergeCandidate {
    int main_id = 0;
    Community iso;
    double delta_q = 0.0;
    double delta_k = 0.0;
    double distance_t = 0.0;
    double score_l = 0.0;
    bool distance_sampled = false;
};

// =============================================================================
// Union-graph statistics
// =============================================================================

/// Edge weight totals of the similarity graph over main ∪ iso, split by where
/// the edge lives. Everything ΔQ and Δk need follows from these three numbers.
struct UnionWeights {
    double main_internal = 0.0;
    double iso_internal = 0.0;
    double between = 0.0;

    double total() const { return main_internal + iso_internal + between; }
};

namespace detail {

inline bool is_edge(double s, double threshold) { return s > threshold && s > 0.0; }

inline double internal_weight(const Matrix& unit, const NodeSet& members, double threshold) {
    double w = 0.0;
    for (std::size_t i = 0; i < members.size(); ++i) {
        auto ri = unit.row(members[i]);
        for (std::size_t j = i + 1; j < members.size(); ++j) {
            double s = unit_similarity(ri, unit.row(members[j]));
            if (is_edge(s, threshold)) w += s;
        }
    }
    return w;
}

inline double cross_weight(const Matrix& unit, const NodeSet& a, const NodeSet& b, double threshold) {
    double w = 0.0;
    for (NodeId u : a) {
        auto ru = unit.row(u);
        for (NodeId v : b) {
            double s = unit_similarity(ru, unit.row(v));
            if (is_edge(s, threshold)) w += s;
        }
    }
    return w;
}

inline Matrix unit_rows_for(const Dataset& data, const NodeSet& a, const NodeSet& b) {
    Matrix unit(data.size(), data.dim());
    for (const NodeSet* side : {&a, &b}) {
        for (NodeId v : *side) {
            if (v >= data.size()) throw Error("merging: node index out of range");
            auto src = data.row(v);
            double n = norm(src);
            if (n == 0.0) throw Error("merging: row " + std::to_string(v) + " is a zero vector");
            auto dst = unit.row(v);
            for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] / n;
        }
    }
    return unit;
}

inline void check_pair(const Community& main, const Community& iso) {
    if (main.members.empty() || iso.members.empty()) throw Error("merging: communities must be non-empty");
    if (!disjoint(main.members, iso.members)) throw Error("merging: main and isolated communities overlap");
}

}  // namespace detail

inline UnionWeights union_weights(const Matrix& unit, const Community& main, const Community& iso, double threshold) {
    detail::check_pair(main, iso);
    return {detail::internal_weight(unit, main.members, threshold),
            detail::internal_weight(unit, iso.members, threshold),
            detail::cross_weight(unit, main.members, iso.members, threshold)};
}

/// Modularity gain of joining the two communities inside their union graph:
/// w_between / W - D_main * D_iso / (2 W^2).
inline double delta_modularity(const UnionWeights& w) {
    const double W = w.total();
    if (W <= 0.0) return 0.0;
    const double d_main = 2.0 * w.main_internal + w.between;
    const double d_iso = 2.0 * w.iso_internal + w.between;
    return w.between / W - d_main * d_iso / (2.0 * W * W);
}

/// Mean degree over main ∪ iso in the union graph minus mean degree of main alone.
inline double delta_avg_degree(const UnionWeights& w, std::size_t main_size, std::size_t iso_size) {
    const double after = 2.0 * w.total() / static_cast<double>(main_size + iso_size);
    const double before = 2.0 * w.main_internal / static_cast<double>(main_size);
    return after - before;
}

inline double delta_modularity(const Dataset& data, const Community& main, const Community& iso, double threshold) {
    detail::check_pair(main, iso);
    Matrix unit = detail::unit_rows_for(data, main.members, iso.members);
    return delta_modularity(union_weights(unit, main, iso, threshold));
}

inline double delta_avg_degree(const Dataset& data, const Community& main, const Community& iso, double threshold) {
    detail::check_pair(main, iso);
    Matrix unit = detail::unit_rows_for(data, main.members, iso.members);
    return delta_avg_degree(union_weights(unit, main, iso, threshold), main.size(), iso.size());
}

// =============================================================================
// Community distance
// =============================================================================

struct DistanceResult {
    double value = 0.0;
    bool sampled = false;
};

namespace detail {

inline NodeSet sample_members(const NodeSet& members, std::size_t cap, Rng& rng) {
    if (members.size() <= cap) return members;
    NodeSet pool = members;
    for (std::size_t i = 0; i < cap; ++i) {
        std::size_t j = i + uniform_below(rng, pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(cap);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace detail

/// Mean pairwise Euclidean distance between the member rows of two
/// communities. A side larger than `cap` is replaced by a seeded uniform
/// subsample of `cap` members, and the result is flagged as sampled.
inline DistanceResult community_distance_ex(const Matrix& rows, const Community& a, const Community& b,
                                            std::size_t cap, std::uint64_t seed) {
    if (a.members.empty() || b.members.empty()) throw Error("community_distance: empty community");
    if (cap < 1) throw Error("community_distance: cap must be positive");
    Rng rng(seed);
    NodeSet left = detail::sample_members(a.members, cap, rng);
    NodeSet right = detail::sample_members(b.members, cap, rng);
    double sum = 0.0;
    for (NodeId u : left) {
        auto ru = rows.row(u);
        for (NodeId v : right) sum += euclidean(ru, rows.row(v));
    }
    DistanceResult r;
    r.value = sum / (static_cast<double>(left.size()) * static_cast<double>(right.size()));
    r.sampled = left.size() != a.members.size() || right.size() != b.members.size();
    return r;
}

inline double community_distance(const Dataset& data, const Community& main, const Community& iso,
                                 std::size_t cap, std::uint64_t seed) {
    for (const auto* c : {&main, &iso}) {
        if (!c->members.empty() && c->members.back() >= data.size()) {
            throw Error("community_distance: node index out of range");
        }
    }
    return community_distance_ex(data.embeddings(), main, iso, cap, seed).value;
}

// =============================================================================
// Ensemble score
// =============================================================================

/// L = ΔQ / max|ΔQ| + Δk / max|Δk| - t / max|t| over the candidate set.
/// A term whose largest magnitude is zero contributes nothing.
inline void ensemble_scores(std::vector<MergeCandidate>& candidates) {
    if (candidates.empty()) throw Error("ensemble_scores: no candidates");
    double max_q = 0.0;
    double max_k = 0.0;
    double max_t = 0.0;
    for (const auto& c : candidates) {
        if (!std::isfinite(c.delta_q) || !std::isfinite(c.delta_k) || !std::isfinite(c.distance_t)) {
            throw Error("ensemble_scores: non-finite candidate term");
        }
        max_q = std::max(max_q, std::abs(c.delta_q));
        max_k = std::max(max_k, std::abs(c.delta_k));
        max_t = std::max(max_t, std::abs(c.distance_t));
    }
    auto scaled = [](double x, double m) { return m > 0.0 ? x / m : 0.0; };
    for (auto& c : candidates) {
        c.score_l = scaled(c.delta_q, max_q) + scaled(c.delta_k, max_k) - scaled(c.distance_t, max_t);
    }
}

// =============================================================================
// Merge round
// =============================================================================

struct MergeRoundOptions {
    /// Assign every isolated community to its best main community in this round.
    bool forced = false;
    double score_floor = -std::numeric_limits<double>::infinity();
    std::size_t distance_cap = 256;
    double threshold = 0.5;
    std::uint64_t seed = 0;
};

/// Scores every (main, isolated) pair over the given rows.
inline std::vector<MergeCandidate> score_candidates(const Matrix& rows, const Matrix& unit,
                                                    const std::map<int, Community>& mains,
                                                    const std::vector<Community>& isolated,
                                                    const MergeRoundOptions& opts) {
    std::vector<MergeCandidate> out;
    std::vector<double> iso_internal(isolated.size());
    for (std::size_t j = 0; j < isolated.size(); ++j) {
        iso_internal[j] = detail::internal_weight(unit, isolated[j].members, opts.threshold);
    }
    for (const auto& [cluster, main] : mains) {
        const double main_internal = detail::internal_weight(unit, main.members, opts.threshold);
        for (std::size_t j = 0; j < isolated.size(); ++j) {
            const auto& iso = isolated[j];
            detail::check_pair(main, iso);
            UnionWeights w{main_internal, iso_internal[j],
                           detail::cross_weight(unit, main.members, iso.members, opts.threshold)};
            MergeCandidate c;
            c.main_id = cluster;
            c.iso = iso;
            c.delta_q = delta_modularity(w);
            c.delta_k = delta_avg_degree(w, main.size(), iso.size());
            auto dist = community_distance_ex(
                rows, main, iso, opts.distance_cap,
                splitmix64(opts.seed ^ (static_cast<std::uint64_t>(cluster) << 32) ^ iso.members.front()));
            c.distance_t = dist.value;
            c.distance_sampled = dist.sampled;
            out.push_back(std::move(c));
        }
    }
    return out;
}

/// Greedy resolution in descending L. Each isolated community is consumed at
/// most once; outside a forced round each main community takes at most one.
/// Returns indices into `candidates` in the order they were accepted.
inline std::vector<std::size_t> resolve_merges(const std::vector<MergeCandidate>& candidates,
                                               const MergeRoundOptions& opts) {
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = candidates[a];
        const auto& y = candidates[b];
        if (x.score_l != y.score_l) return x.score_l > y.score_l;
        if (x.main_id != y.main_id) return x.main_id < y.main_id;
        return x.iso.members.front() < y.iso.members.front();
    });
    std::set<int> mains_used;
    std::set<NodeId> isos_used;  // keyed by smallest member
    std::vector<std::size_t> chosen;
    for (std::size_t idx : order) {
        const auto& c = candidates[idx];
        if (isos_used.count(c.iso.members.front())) continue;
        if (!opts.forced) {
            if (mains_used.count(c.main_id)) continue;
            if (c.score_l < opts.score_floor) continue;
        }
        mains_used.insert(c.main_id);
        isos_used.insert(c.iso.members.front());
        chosen.push_back(idx);
    }
    return chosen;
}

/// One merge round: detect isolated communities in the unlabeled pool with
/// Leiden, score all (main, isolated) pairs, and merge greedily.
///
/// `rows` are the current embeddings (distances), `unit` their unit-length
/// copy (similarities). Sets `state.terminated` when the pool is empty.
/// If `pool_graph` is non-null it receives the pool graph used for detection.
inline IterationRecord merge_round(ClusterState& state, const Matrix& rows, const Matrix& unit,
                                   const MergeRoundOptions& opts, WeightedGraph* pool_graph = nullptr) {
    IterationRecord rec;
    rec.iteration = state.iteration;
    rec.forced = opts.forced;
    rec.unlabeled_before = state.unlabeled.size();
    if (state.unlabeled.empty()) {
        state.terminated = true;
        rec.unlabeled_after = 0;
        return rec;
    }

    using Clock = std::chrono::steady_clock;
    auto seconds = [](Clock::time_point a, Clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };
    auto t0 = Clock::now();
    WeightedGraph g = build_graph_unit(unit, state.unlabeled, opts.threshold);
    auto detection = leiden(g, substream_seed(opts.seed, "leiden-pool"));
    const auto& isolated = detection.partition.communities();
    rec.isolated_communities = isolated.size();
    auto t1 = Clock::now();
    rec.times.detect_seconds = seconds(t0, t1);

    auto candidates = score_candidates(rows, unit, state.main_communities, isolated, opts);
    rec.candidates = candidates.size();
    if (!candidates.empty()) {
        ensemble_scores(candidates);
        NodeSet absorbed;
        for (std::size_t idx : resolve_merges(candidates, opts)) {
            const auto& c = candidates[idx];
            auto& main = state.main_communities.at(c.main_id);
            main.members = set_union(main.members, c.iso.members);
            absorbed.insert(absorbed.end(), c.iso.members.begin(), c.iso.members.end());
            rec.merges.push_back({c.main_id, c.iso.members, c.delta_q, c.delta_k, c.distance_t, c.score_l,
                                  c.distance_sampled});
        }
        state.unlabeled = set_difference(state.unlabeled, sorted_unique(std::move(absorbed)));
    }
    rec.unlabeled_after = state.unlabeled.size();
    rec.times.merge_seconds = seconds(t1, Clock::now());
    if (state.unlabeled.empty()) state.terminated = true;
    if (pool_graph) *pool_graph = std::move(g);
    return rec;
}

}  // namespace dcvcd
