#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dcvcd/community.hpp"
#include "dcvcd/core.hpp"
#include "dcvcd/graph.hpp"
#include "dcvcd/random.hpp"

namespace dcvcd {

struct KMeansOptions {
    int max_rounds = 300;
};

/// k-means++ seeding followed by Lloyd iterations until the assignment is
/// stable or `max_rounds` is reached. A cluster that empties out is repaired
/// by moving in the point farthest from its current centroid.
inline Labeling kmeans_init(const Dataset& data, int k, std::uint64_t seed, KMeansOptions opts = {}) {
    const std::size_t n = data.size();
    const std::size_t d = data.dim();
    if (k < 1) throw Error("kmeans: k must be positive");
    if (static_cast<std::size_t>(k) > n) {
        throw Error("kmeans: k = " + std::to_string(k) + " exceeds the sample count " + std::to_string(n));
    }
    Rng rng(seed);

    auto sq = [&](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double t = a[j] - b[j];
            s += t * t;
        }
        return s;
    };

    Matrix centers(k, d);
    std::vector<double> closest(n, std::numeric_limits<double>::infinity());
    std::size_t first = uniform_below(rng, n);
    std::copy_n(data.row(first).begin(), d, centers.row(0).begin());
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            closest[i] = std::min(closest[i], sq(data.row(i), centers.row(c - 1)));
            total += closest[i];
        }
        std::size_t pick = n - 1;
        if (total > 0.0) {
            double target = uniform01(rng) * total;
            double run = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                run += closest[i];
                if (run > target && closest[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = uniform_below(rng, n);
        }
        std::copy_n(data.row(pick).begin(), d, centers.row(c).begin());
    }

    Labeling labels(n, -1);
    std::vector<double> dist(n, 0.0);
    for (int round = 0; round < opts.max_rounds; ++round) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq(data.row(i), centers.row(0));
            for (int c = 1; c < k; ++c) {
                double dc = sq(data.row(i), centers.row(c));
                if (dc < best_d) {
                    best_d = dc;
                    best = c;
                }
            }
            dist[i] = best_d;
            if (labels[i] != best) {
                labels[i] = best;
                changed = true;
            }
        }

        std::vector<std::size_t> counts(k, 0);
        for (int l : labels) ++counts[l];
        for (int c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            // Empty-cluster repair: steal the worst-fitting point from a cluster that can spare it.
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[labels[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
            }
            --counts[labels[far]];
            labels[far] = c;
            dist[far] = 0.0;
            ++counts[c];
            changed = true;
        }

        centers = Matrix(k, d);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = data.row(i);
            auto cr = centers.row(labels[i]);
            for (std::size_t j = 0; j < d; ++j) cr[j] += r[j];
        }
        for (int c = 0; c < k; ++c) {
            for (double& x : centers.row(c)) x /= static_cast<double>(counts[c]);
        }
        if (!changed) break;
    }
    return labels;
}

/// Members of each cluster 0..k-1 of a total labeling.
inline std::vector<NodeSet> cluster_members(const Labeling& labels, int k) {
    std::vector<NodeSet> out(k);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= k) throw Error("labeling is not total over clusters 0..k-1");
        out[labels[i]].push_back(i);
    }
    return out;
}

/// Similarity graph + Leiden inside every initial cluster.
inline std::vector<Partition> detect_initial_communities(const Dataset& data, const Labeling& labels,
                                                         const RunConfig& cfg) {
    if (labels.size() != data.size()) throw Error("initial labeling does not cover the dataset");
    std::vector<Partition> out;
    auto clusters = cluster_members(labels, cfg.k);
    for (int c = 0; c < cfg.k; ++c) {
        if (clusters[c].empty()) {
            out.emplace_back();
            continue;
        }
        WeightedGraph g = build_graph(data, clusters[c], cfg.similarity_threshold);
        out.push_back(leiden(g, substream_seed(cfg.seed, "leiden", static_cast<std::uint64_t>(c))).partition);
    }
    return out;
}

/// Largest community; ties go to the one holding the smallest node index.
inline const Community& select_main(const Partition& p) {
    if (p.empty()) throw Error("select_main: empty partition");
    const Community* best = &p.communities().front();
    for (const auto& c : p.communities()) {
        if (c.size() > best->size() || (c.size() == best->size() && c.members.front() < best->members.front())) {
            best = &c;
        }
    }
    return *best;
}

struct ScreenResult {
    Community kept;
    NodeSet rejected;
};

/// Keeps members whose Euclidean distance to the centroid is at most the
/// nearest-rank `confidence` quantile of those distances.
inline ScreenResult risk_screen(const Community& c, const Dataset& data, double confidence) {
    if (!(confidence > 0.0 && confidence < 1.0)) throw Error("risk_screen: confidence must lie in (0, 1)");
    if (c.members.empty()) throw Error("risk_screen: empty community");
    auto center = centroid(c, data);
    const std::size_t m = c.members.size();
    std::vector<double> dist(m);
    for (std::size_t i = 0; i < m; ++i) dist[i] = euclidean(data.row(c.members[i]), center);

    std::vector<double> sorted = dist;
    std::sort(sorted.begin(), sorted.end());
    auto rank = static_cast<std::size_t>(std::ceil(confidence * static_cast<double>(m) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, m);
    const double cutoff = sorted[rank - 1];

    NodeSet kept;
    NodeSet rejected;
    for (std::size_t i = 0; i < m; ++i) {
        (dist[i] <= cutoff ? kept : rejected).push_back(c.members[i]);
    }
    if (kept.empty()) {
        // Anchor fallback: retain the member closest to the centroid.
        auto at = static_cast<std::size_t>(std::min_element(dist.begin(), dist.end()) - dist.begin());
        kept.push_back(c.members[at]);
        rejected.erase(std::find(rejected.begin(), rejected.end(), c.members[at]));
    }
    return {Community(c.id, std::move(kept)), std::move(rejected)};
}

/// Per-cluster bookkeeping from the seeding step.
struct SeedCluster {
    NodeSet members;
    std::size_t community_count = 0;
    Community main_before_screen;
    Community main;
    NodeSet rejected;
};

struct SeedingResult {
    Labeling initial_labels;
    std::vector<SeedCluster> clusters;
    ClusterState state;
};

/// Initial clustering, per-cluster detection, main-community selection and
/// risk screening. Everything outside the screened main communities lands in
/// the unlabeled pool.
inline SeedingResult seed_clusters(const Dataset& data, const RunConfig& cfg) {
    SeedingResult out;
    out.initial_labels = kmeans_init(data, cfg.k, substream_seed(cfg.seed, "init"));
    auto partitions = detect_initial_communities(data, out.initial_labels, cfg);
    auto members = cluster_members(out.initial_labels, cfg.k);

    out.state.n = data.size();
    out.state.k = cfg.k;
    NodeSet labeled;
    for (int c = 0; c < cfg.k; ++c) {
        SeedCluster sc;
        sc.members = members[c];
        sc.community_count = partitions[c].size();
        sc.main_before_screen = select_main(partitions[c]);
        auto screened = risk_screen(sc.main_before_screen, data, cfg.confidence);
        sc.main = Community(c, screened.kept.members);
        sc.rejected = std::move(screened.rejected);
        labeled.insert(labeled.end(), sc.main.members.begin(), sc.main.members.end());
        out.state.main_communities.emplace(c, sc.main);
        out.clusters.push_back(std::move(sc));
    }
    NodeSet all(data.size());
    std::iota(all.begin(), all.end(), NodeId{0});
    out.state.unlabeled = set_difference(all, sorted_unique(std::move(labeled)));
    out.state.check_invariant();
    return out;
}

}  // namespace dcvcd
