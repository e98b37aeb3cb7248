#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "dcvcd/core.hpp"
#include "dcvcd/random.hpp"

namespace dcvcd {

/// Anchors with one positive each (same pseudo-label, not the anchor) and a
/// list of negatives (different pseudo-labels).
struct RefineBatch {
    std::vector<NodeId> anchors;
    std::vector<NodeId> positives;
    std::vector<std::vector<NodeId>> negatives;

    std::size_t size() const noexcept { return anchors.size(); }

    /// Checks the label invariants against a pseudo-labeling.
    void validate(const Labeling& pseudo) const {
        if (positives.size() != anchors.size() || negatives.size() != anchors.size()) {
            throw Error("refine batch: anchors, positives and negatives differ in length");
        }
        for (std::size_t i = 0; i < anchors.size(); ++i) {
            NodeId a = anchors[i];
            if (positives[i] == a) throw Error("refine batch: anchor is its own positive");
            if (pseudo.at(positives[i]) != pseudo.at(a)) throw Error("refine batch: positive has another label");
            for (NodeId neg : negatives[i]) {
                if (neg == a) throw Error("refine batch: anchor listed among its negatives");
                if (pseudo.at(neg) == pseudo.at(a)) throw Error("refine batch: negative shares the anchor label");
            }
        }
    }
};

namespace detail {

struct RowNorms {
    const Matrix& z;
    std::vector<double> cache;

    explicit RowNorms(const Matrix& m) : z(m), cache(m.rows(), -1.0) {}

    double operator()(NodeId v) {
        if (cache[v] < 0.0) {
            cache[v] = norm(z.row(v));
            if (cache[v] == 0.0) throw Error("infonce: zero-norm embedding at row " + std::to_string(v));
        }
        return cache[v];
    }
};

inline double cos_rows(const Matrix& z, RowNorms& norms, NodeId a, NodeId b) {
    return dot(z.row(a), z.row(b)) / (norms(a) * norms(b));
}

/// d cos(a, b) / d a scaled by `coef`, accumulated into grad.row(a).
inline void add_cos_grad(const Matrix& z, RowNorms& norms, Matrix& grad, NodeId a, NodeId b, double cos_ab,
                         double coef) {
    const double na = norms(a);
    const double nb = norms(b);
    auto za = z.row(a);
    auto zb = z.row(b);
    auto ga = grad.row(a);
    const double c1 = coef / (na * nb);
    const double c2 = coef * cos_ab / (na * na);
    for (std::size_t j = 0; j < za.size(); ++j) ga[j] += c1 * zb[j] - c2 * za[j];
}

/// Loss (and optionally gradient) of one batch. Anchors with no negatives
/// contribute exactly zero.
inline double infonce(const Matrix& z, const RefineBatch& batch, double tau, Matrix* grad) {
    if (!(tau > 0.0)) throw Error("infonce: tau must be positive");
    if (batch.positives.size() != batch.anchors.size() || batch.negatives.size() != batch.anchors.size()) {
        throw Error("infonce: malformed batch");
    }
    RowNorms norms(z);
    double loss = 0.0;
    std::vector<double> logits;
    std::vector<double> cosines;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const NodeId a = batch.anchors[i];
        norms(a);
        const auto& negs = batch.negatives[i];
        if (negs.empty()) continue;
        const NodeId p = batch.positives[i];

        cosines.assign(1, cos_rows(z, norms, a, p));
        for (NodeId j : negs) cosines.push_back(cos_rows(z, norms, a, j));
        logits.resize(cosines.size());
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < cosines.size(); ++t) {
            logits[t] = cosines[t] / tau;
            top = std::max(top, logits[t]);
        }
        double sum = 0.0;
        for (double l : logits) sum += std::exp(l - top);
        const double lse = top + std::log(sum);
        loss += lse - logits[0];

        if (grad) {
            // dℓ/d logit_t = softmax_t - [t == 0]; d logit / d cos = 1 / tau.
            for (std::size_t t = 0; t < cosines.size(); ++t) {
                double coef = (std::exp(logits[t] - lse) - (t == 0 ? 1.0 : 0.0)) / tau;
                NodeId other = t == 0 ? p : negs[t - 1];
                add_cos_grad(z, norms, *grad, a, other, cosines[t], coef);
                add_cos_grad(z, norms, *grad, other, a, cosines[t], coef);
            }
        }
    }
    return loss;
}

}  // namespace detail

/// Σ_i -log( exp(s_ip/τ) / (exp(s_ip/τ) + Σ_{j∈N_i} exp(s_ij/τ)) ), s = cosine.
inline double infonce_loss(const Matrix& embeddings, const RefineBatch& batch, double tau) {
    return detail::infonce(embeddings, batch, tau, nullptr);
}

/// Analytic gradient of infonce_loss; rows not touched by the batch are zero.
inline Matrix infonce_grad(const Matrix& embeddings, const RefineBatch& batch, double tau) {
    Matrix grad(embeddings.rows(), embeddings.cols());
    detail::infonce(embeddings, batch, tau, &grad);
    return grad;
}

struct RefineResult {
    Matrix embeddings;
    std::vector<double> epoch_losses;
    bool skipped = false;
    std::string warning;
};

/// Mini-batch SGD on the embedding rows of pseudo-labeled nodes.
///
/// Labeled nodes are the main-community members, labeled by cluster id. Each
/// epoch shuffles them into batches of `batch_size`; every anchor draws a
/// fresh positive from its own community and uses the other-label anchors of
/// the batch as negatives. Unlabeled rows are never touched. Refinement is
/// skipped (with a warning) unless at least two main communities each have
/// two or more members.
inline RefineResult refine_embeddings(const ClusterState& state, const Matrix& embeddings, const RunConfig& cfg,
                                      std::uint64_t seed) {
    RefineResult out{embeddings, {}, false, {}};
    std::size_t eligible = 0;
    for (const auto& [_, c] : state.main_communities) {
        if (c.size() >= 2) ++eligible;
    }
    if (eligible < 2 || eligible != state.main_communities.size()) {
        out.skipped = true;
        out.warning = "refinement skipped: needs at least two main communities, each with at least two members";
        return out;
    }

    Labeling pseudo(embeddings.rows(), -1);
    std::vector<NodeId> labeled;
    std::map<int, const Community*> by_label;
    for (const auto& [cluster, c] : state.main_communities) {
        by_label[cluster] = &c;
        for (NodeId v : c.members) {
            pseudo[v] = cluster;
            labeled.push_back(v);
        }
    }
    std::sort(labeled.begin(), labeled.end());

    Rng rng(seed);
    Matrix& z = out.embeddings;
    Matrix grad(z.rows(), z.cols());
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs_per_iteration; ++epoch) {
        std::vector<NodeId> order = labeled;
        shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            std::size_t stop = std::min(order.size(), start + bs);
            RefineBatch batch;
            for (std::size_t i = start; i < stop; ++i) {
                NodeId a = order[i];
                const auto& members = by_label.at(pseudo[a])->members;
                // Uniform over the community minus the anchor.
                std::size_t pick = uniform_below(rng, members.size() - 1);
                auto self = static_cast<std::size_t>(
                    std::lower_bound(members.begin(), members.end(), a) - members.begin());
                if (pick >= self) ++pick;
                batch.anchors.push_back(a);
                batch.positives.push_back(members[pick]);
                std::vector<NodeId> negs;
                for (std::size_t j = start; j < stop; ++j) {
                    if (pseudo[order[j]] != pseudo[a]) negs.push_back(order[j]);
                }
                batch.negatives.push_back(std::move(negs));
            }
            epoch_loss += detail::infonce(z, batch, cfg.tau, &grad);
            // Only anchor and positive rows carry gradient; update and clear them.
            std::vector<NodeId> touched = batch.anchors;
            touched.insert(touched.end(), batch.positives.begin(), batch.positives.end());
            touched = sorted_unique(std::move(touched));
            for (NodeId v : touched) {
                auto zr = z.row(v);
                auto gr = grad.row(v);
                for (std::size_t j = 0; j < zr.size(); ++j) {
                    zr[j] -= cfg.learning_rate * gr[j];
                    gr[j] = 0.0;
                }
            }
        }
        out.epoch_losses.push_back(epoch_loss);
    }
    return out;
}

}  // namespace dcvcd
