#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "dcvcd/core.hpp"

namespace dcvcd {

/// Cluster-by-class count table with both label sets mapped to dense indices.
struct Contingency {
    std::vector<std::vector<long long>> counts;  // [pred][truth]
    std::vector<long long> pred_totals;
    std::vector<long long> truth_totals;
    long long n = 0;

    static Contingency from(std::span<const int> pred, std::span<const int> truth) {
        if (pred.size() != truth.size()) {
            throw Error("metrics: prediction length " + std::to_string(pred.size()) + " does not match truth length " +
                        std::to_string(truth.size()));
        }
        std::map<int, std::size_t> pi;
        std::map<int, std::size_t> ti;
        for (int p : pred) pi.emplace(p, 0);
        for (int t : truth) ti.emplace(t, 0);
        std::size_t next = 0;
        for (auto& [_, idx] : pi) idx = next++;
        next = 0;
        for (auto& [_, idx] : ti) idx = next++;
        Contingency c;
        c.counts.assign(pi.size(), std::vector<long long>(ti.size(), 0));
        c.pred_totals.assign(pi.size(), 0);
        c.truth_totals.assign(ti.size(), 0);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            std::size_t a = pi[pred[i]];
            std::size_t b = ti[truth[i]];
            ++c.counts[a][b];
            ++c.pred_totals[a];
            ++c.truth_totals[b];
        }
        c.n = static_cast<long long>(pred.size());
        return c;
    }
};

/// Maximum-weight perfect matching on a square matrix (Hungarian algorithm,
/// O(n^3), potentials form). Returns row -> column.
inline std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
    const int n = static_cast<int>(weight.size());
    if (n == 0) return {};
    double top = 0.0;
    for (const auto& row : weight) {
        if (static_cast<int>(row.size()) != n) throw Error("assignment: matrix must be square");
        for (double w : row) top = std::max(top, w);
    }
    // Minimize (top - w) with 1-based arrays.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = match[j0];
            int j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = (top - weight[i0 - 1][j - 1]) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j) {
        if (match[j] > 0) row_to_col[match[j] - 1] = j - 1;
    }
    return row_to_col;
}

/// Clustering accuracy under the best one-to-one cluster/class matching.
/// The contingency table is padded to square with zeros.
inline double accuracy(std::span<const int> pred, std::span<const int> truth) {
    auto c = Contingency::from(pred, truth);
    if (c.n == 0) throw Error("accuracy: empty labeling");
    std::size_t size = std::max(c.counts.size(), c.truth_totals.size());
    std::vector<std::vector<double>> w(size, std::vector<double>(size, 0.0));
    for (std::size_t a = 0; a < c.counts.size(); ++a) {
        for (std::size_t b = 0; b < c.truth_totals.size(); ++b) w[a][b] = static_cast<double>(c.counts[a][b]);
    }
    auto match = max_weight_assignment(w);
    long long hit = 0;
    for (std::size_t a = 0; a < c.counts.size(); ++a) {
        auto b = static_cast<std::size_t>(match[a]);
        if (b < c.truth_totals.size()) hit += c.counts[a][b];
    }
    return static_cast<double>(hit) / static_cast<double>(c.n);
}

/// Normalized mutual information, I / sqrt(H_pred * H_truth), natural log.
inline double nmi(std::span<const int> pred, std::span<const int> truth) {
    auto c = Contingency::from(pred, truth);
    if (c.n == 0) throw Error("nmi: empty labeling");
    const double n = static_cast<double>(c.n);
    auto entropy = [&](const std::vector<long long>& totals) {
        double h = 0.0;
        for (long long t : totals) {
            if (t > 0) {
                double p = static_cast<double>(t) / n;
                h -= p * std::log(p);
            }
        }
        return h;
    };
    const double hp = entropy(c.pred_totals);
    const double ht = entropy(c.truth_totals);
    if (hp == 0.0 || ht == 0.0) {
        // A single-cluster side carries no information; identical only if both are single-cluster.
        return (hp == 0.0 && ht == 0.0) ? 1.0 : 0.0;
    }
    double mi = 0.0;
    for (std::size_t a = 0; a < c.counts.size(); ++a) {
        for (std::size_t b = 0; b < c.truth_totals.size(); ++b) {
            long long nab = c.counts[a][b];
            if (nab == 0) continue;
            double pab = static_cast<double>(nab) / n;
            mi += pab * std::log(static_cast<double>(nab) * n /
                                 (static_cast<double>(c.pred_totals[a]) * static_cast<double>(c.truth_totals[b])));
        }
    }
    return std::clamp(mi / std::sqrt(hp * ht), 0.0, 1.0);
}

/// Adjusted Rand index from the contingency table.
inline double ari(std::span<const int> pred, std::span<const int> truth) {
    auto c = Contingency::from(pred, truth);
    if (c.n == 0) throw Error("ari: empty labeling");
    auto pairs = [](long long x) { return static_cast<double>(x) * static_cast<double>(x - 1) / 2.0; };
    double index = 0.0;
    for (const auto& row : c.counts) {
        for (long long x : row) index += pairs(x);
    }
    double sum_pred = 0.0;
    double sum_truth = 0.0;
    for (long long x : c.pred_totals) sum_pred += pairs(x);
    for (long long x : c.truth_totals) sum_truth += pairs(x);
    const double total = pairs(c.n);
    if (total == 0.0) return 1.0;
    const double expected = sum_pred * sum_truth / total;
    const double max_index = 0.5 * (sum_pred + sum_truth);
    if (max_index == expected) {
        // Both partitions trivial in the same way (all singletons or one cluster).
        return index == max_index ? 1.0 : 0.0;
    }
    return (index - expected) / (max_index - expected);
}

/// Majority-class fraction of a community.
inline double purity(const Community& c, std::span<const int> truth) {
    if (c.members.empty()) throw Error("purity: empty community");
    std::map<int, std::size_t> freq;
    std::size_t best = 0;
    for (NodeId v : c.members) {
        if (v >= truth.size()) throw Error("purity: member without a truth label");
        best = std::max(best, ++freq[truth[v]]);
    }
    return static_cast<double>(best) / static_cast<double>(c.members.size());
}

}  // namespace dcvcd
