#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace dcvcd {

/// Every recoverable failure in the library surfaces as this exception.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using NodeId = std::size_t;
using NodeSet = std::vector<NodeId>;  // strictly increasing
using Labeling = std::vector<int>;

// =============================================================================
// Matrix: dense row-major n x d storage
// =============================================================================

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (data_.size() != rows_ * cols_) {
            throw Error("matrix payload size does not match shape");
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    const std::vector<double>& values() const noexcept { return data_; }
    std::vector<double>& values() noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// =============================================================================
// Dataset
// =============================================================================

/// Sample ids plus an n x d embedding matrix. Node identity is the row index;
/// ids are carried for I/O only. Ground truth is optional and only read by
/// evaluation code.
class Dataset {
public:
    Dataset(std::vector<std::string> ids, Matrix embeddings,
            std::optional<Labeling> ground_truth = std::nullopt)
        : ids_(std::move(ids)), embeddings_(std::move(embeddings)), truth_(std::move(ground_truth)) {
        if (ids_.size() != embeddings_.rows()) {
            throw Error("dataset: id count " + std::to_string(ids_.size()) +
                        " does not match row count " + std::to_string(embeddings_.rows()));
        }
        if (embeddings_.cols() < 1) throw Error("dataset: embedding dimension must be >= 1");
        for (std::size_t k = 0; k < embeddings_.values().size(); ++k) {
            if (!std::isfinite(embeddings_.values()[k])) {
                throw Error("dataset: non-finite embedding entry at row " +
                            std::to_string(k / embeddings_.cols()) + ", column " +
                            std::to_string(k % embeddings_.cols()));
            }
        }
        std::unordered_set<std::string_view> seen;
        for (const auto& id : ids_) {
            if (!seen.insert(id).second) throw Error("dataset: duplicate sample id '" + id + "'");
        }
        if (truth_ && truth_->size() != ids_.size()) {
            throw Error("dataset: ground-truth length does not match row count");
        }
    }

    std::size_t size() const noexcept { return embeddings_.rows(); }
    std::size_t dim() const noexcept { return embeddings_.cols(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const Matrix& embeddings() const noexcept { return embeddings_; }
    std::span<const double> row(NodeId i) const { return embeddings_.row(i); }
    const std::optional<Labeling>& ground_truth() const noexcept { return truth_; }

    /// Copy with the embeddings swapped out (used after refinement).
    Dataset with_embeddings(Matrix embeddings) const {
        if (embeddings.rows() != size() || embeddings.cols() != dim()) {
            throw Error("dataset: replacement embeddings have the wrong shape");
        }
        return Dataset(ids_, std::move(embeddings), truth_);
    }

private:
    std::vector<std::string> ids_;
    Matrix embeddings_;
    std::optional<Labeling> truth_;
};

// =============================================================================
// Community / Partition
// =============================================================================

struct Community {
    int id = 0;
    NodeSet members;

    Community() = default;
    Community(int id_, NodeSet members_) : id(id_), members(std::move(members_)) {
        if (members.empty()) throw Error("community must be non-empty");
        for (std::size_t i = 1; i < members.size(); ++i) {
            if (members[i - 1] >= members[i]) {
                throw Error("community members must be strictly increasing");
            }
        }
    }

    std::size_t size() const noexcept { return members.size(); }
    bool contains(NodeId v) const { return std::binary_search(members.begin(), members.end(), v); }

    friend bool operator==(const Community&, const Community&) = default;
};

inline NodeSet sorted_unique(NodeSet nodes) {
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    return nodes;
}

inline NodeSet set_union(const NodeSet& a, const NodeSet& b) {
    NodeSet out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline NodeSet set_difference(const NodeSet& a, const NodeSet& b) {
    NodeSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline bool disjoint(const NodeSet& a, const NodeSet& b) {
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i == *j) return false;
        if (*i < *j) ++i; else ++j;
    }
    return true;
}

/// Disjoint communities covering a declared node subset.
class Partition {
public:
    Partition() = default;
    Partition(NodeSet nodes, std::vector<Community> communities)
        : nodes_(std::move(nodes)), communities_(std::move(communities)) {
        NodeSet covered;
        for (const auto& c : communities_) {
            covered.insert(covered.end(), c.members.begin(), c.members.end());
        }
        std::size_t total = covered.size();
        covered = sorted_unique(std::move(covered));
        if (covered.size() != total) throw Error("partition: communities overlap");
        if (covered != nodes_) throw Error("partition: communities do not cover the declared node set");
    }

    /// Builds from a community label per node (labels[i] is the community of nodes[i]).
    /// Communities are renumbered densely in order of their smallest member.
    static Partition from_labels(const NodeSet& nodes, std::span<const int> labels) {
        if (nodes.size() != labels.size()) throw Error("partition: label count mismatch");
        std::map<int, NodeSet> groups;
        for (std::size_t i = 0; i < nodes.size(); ++i) groups[labels[i]].push_back(nodes[i]);
        std::vector<NodeSet> sets;
        for (auto& [_, members] : groups) sets.push_back(sorted_unique(std::move(members)));
        std::sort(sets.begin(), sets.end(),
                  [](const NodeSet& a, const NodeSet& b) { return a.front() < b.front(); });
        std::vector<Community> comms;
        for (std::size_t c = 0; c < sets.size(); ++c) comms.emplace_back(static_cast<int>(c), std::move(sets[c]));
        return Partition(nodes, std::move(comms));
    }

    static Partition singletons(const NodeSet& nodes) {
        std::vector<Community> comms;
        for (std::size_t i = 0; i < nodes.size(); ++i) comms.emplace_back(static_cast<int>(i), NodeSet{nodes[i]});
        return Partition(nodes, std::move(comms));
    }

    const NodeSet& nodes() const noexcept { return nodes_; }
    const std::vector<Community>& communities() const noexcept { return communities_; }
    std::size_t size() const noexcept { return communities_.size(); }
    bool empty() const noexcept { return communities_.empty(); }

    friend bool operator==(const Partition&, const Partition&) = default;

private:
    NodeSet nodes_;
    std::vector<Community> communities_;
};

// =============================================================================
// Configuration
// =============================================================================

struct RunConfig {
    double similarity_threshold = 0.5;
    double confidence = 0.9;
    int k = 2;
    double tau = 0.5;
    double learning_rate = 1e-4;
    int batch_size = 64;
    int epochs_per_iteration = 100;
    int max_iterations = 50;
    std::uint64_t seed = 0;
    int distance_sample_cap = 256;
    double merge_score_floor = -std::numeric_limits<double>::infinity();

    void validate() const {
        if (!(similarity_threshold >= -1.0 && similarity_threshold < 1.0)) {
            throw Error("config: similarity_threshold must lie in [-1, 1)");
        }
        if (!(confidence > 0.0 && confidence < 1.0)) throw Error("config: confidence must lie in (0, 1)");
        if (k < 1) throw Error("config: k must be positive");
        if (!(tau > 0.0) || !std::isfinite(tau)) throw Error("config: tau must be positive");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
            throw Error("config: learning_rate must be positive");
        }
        if (batch_size < 1) throw Error("config: batch_size must be positive");
        if (epochs_per_iteration < 0) throw Error("config: epochs_per_iteration must be non-negative");
        if (max_iterations < 0) throw Error("config: max_iterations must be non-negative");
        if (distance_sample_cap < 1) throw Error("config: distance_sample_cap must be positive");
    }
};

// =============================================================================
// Clustering state
// =============================================================================

/// One merge executed during a round, with the ensemble-score terms that chose it.
struct MergeRecord {
    int cluster = 0;
    NodeSet members;
    double delta_q = 0.0;
    double delta_k = 0.0;
    double distance = 0.0;
    double score = 0.0;
    bool distance_sampled = false;
};

struct PhaseTimes {
    double detect_seconds = 0.0;
    double merge_seconds = 0.0;
    double refine_seconds = 0.0;
};

struct IterationRecord {
    int iteration = 0;
    std::size_t unlabeled_before = 0;
    std::size_t unlabeled_after = 0;
    std::size_t isolated_communities = 0;
    std::size_t candidates = 0;
    bool forced = false;
    std::vector<MergeRecord> merges;
    std::vector<double> refine_losses;  // per epoch
    PhaseTimes times;
};

/// Per-cluster main communities plus the pool of not-yet-labeled nodes.
/// main ∪ unlabeled covers every node; all pieces are pairwise disjoint.
struct ClusterState {
    std::size_t n = 0;
    int k = 0;
    std::map<int, Community> main_communities;
    NodeSet unlabeled;
    int iteration = 0;
    bool terminated = false;
    std::vector<IterationRecord> trace;

    /// Throws if the disjointness/coverage invariant is broken.
    void check_invariant() const {
        std::vector<char> seen(n, 0);
        auto mark = [&](NodeId v, const char* where) {
            if (v >= n) throw Error(std::string("cluster state: node out of range in ") + where);
            if (seen[v]) throw Error(std::string("cluster state: node assigned twice (") + where + ")");
            seen[v] = 1;
        };
        for (const auto& [_, c] : main_communities) {
            for (NodeId v : c.members) mark(v, "main community");
        }
        for (std::size_t i = 1; i < unlabeled.size(); ++i) {
            if (unlabeled[i - 1] >= unlabeled[i]) throw Error("cluster state: unlabeled pool not sorted");
        }
        for (NodeId v : unlabeled) mark(v, "unlabeled pool");
        if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
            throw Error("cluster state: some node is neither labeled nor unlabeled");
        }
    }

    /// Full labeling; unlabeled nodes get -1.
    Labeling labeling() const {
        Labeling out(n, -1);
        for (const auto& [cluster, c] : main_communities) {
            for (NodeId v : c.members) out[v] = cluster;
        }
        return out;
    }
};

// =============================================================================
// Small numeric helpers
// =============================================================================

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double t = a[i] - b[i];
        s += t * t;
    }
    return std::sqrt(s);
}

/// Arithmetic mean of the member rows.
inline std::vector<double> centroid(const Community& c, const Dataset& data) {
    if (c.members.empty()) throw Error("centroid of an empty community");
    std::vector<double> mean(data.dim(), 0.0);
    for (NodeId v : c.members) {
        if (v >= data.size()) throw Error("centroid: member index out of range");
        auto r = data.row(v);
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += r[j];
    }
    for (double& x : mean) x /= static_cast<double>(c.members.size());
    return mean;
}

}  // namespace dcvcd
