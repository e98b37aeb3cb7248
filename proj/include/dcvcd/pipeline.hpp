#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dcvcd/community.hpp"
#include "dcvcd/core.hpp"
#include "dcvcd/graph.hpp"
#include "dcvcd/merging.hpp"
#include "dcvcd/metrics.hpp"
#include "dcvcd/refine.hpp"
#include "dcvcd/seeding.hpp"

namespace dcvcd {

struct Metrics {
    double acc = 0.0;
    double nmi = 0.0;
    double ari = 0.0;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

inline Metrics evaluate(std::span<const int> pred, std::span<const int> truth) {
    return {accuracy(pred, truth), dcvcd::nmi(pred, truth), dcvcd::ari(pred, truth)};
}

struct SeedClusterReport {
    int cluster = 0;
    std::size_t size = 0;
    std::size_t communities = 0;
    std::size_t main_before_screen = 0;
    std::size_t main_after_screen = 0;
    std::size_t rejected = 0;
    std::optional<double> parent_purity;
    std::optional<double> main_purity_before_screen;
    std::optional<double> main_purity_after_screen;

    friend bool operator==(const SeedClusterReport&, const SeedClusterReport&) = default;
};

struct RunReport {
    RunConfig config;
    std::size_t n = 0;
    std::size_t d = 0;
    std::optional<Metrics> initial_metrics;
    std::optional<Metrics> final_metrics;
    std::vector<SeedClusterReport> seeding;
    std::vector<IterationRecord> iterations;
    std::vector<std::string> warnings;
    std::vector<std::string> assumptions;
    double total_seconds = 0.0;

    /// Mean over clusters of the given purity field; nullopt without ground truth.
    std::optional<double> mean_purity(std::optional<double> SeedClusterReport::*field) const {
        if (seeding.empty()) return std::nullopt;
        double sum = 0.0;
        for (const auto& s : seeding) {
            if (!(s.*field)) return std::nullopt;
            sum += *(s.*field);
        }
        return sum / static_cast<double>(seeding.size());
    }
};

/// Modelling choices the engine makes where the method leaves room; echoed in every report.
inline std::vector<std::string> engine_assumptions() {
    return {
        "initial clustering: k-means++ seeding with Lloyd iterations (at most 300 rounds)",
        "similarity graph: cosine similarity on unit-normalized copies, edge iff similarity > threshold and > 0",
        "community detection: Leiden, modularity with resolution 1, greedy refinement, best of 8 seeded starts, connected-component split",
        "risk screening: Euclidean distance to the centroid, nearest-rank empirical quantile",
        "merge score: each term divided by its largest absolute value over the round's candidate set",
        "merge conflicts: global greedy by score, one isolated community per main community per round",
        "final round after max_iterations merges every remaining isolated community to its best main community",
        "refinement: InfoNCE on embedding rows of pseudo-labeled nodes, in-batch negatives, plain SGD",
        "metrics: ACC by optimal assignment on the padded contingency table; NMI with geometric-mean normalization",
    };
}

// =============================================================================
// JSON serialization
// =============================================================================

using Json = nlohmann::json;

namespace detail {

template <typename T>
Json opt_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> opt_from(const Json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<T>();
}

}  // namespace detail

inline void to_json(Json& j, const RunConfig& c) {
    j = Json{{"similarity_threshold", c.similarity_threshold},
             {"confidence", c.confidence},
             {"k", c.k},
             {"tau", c.tau},
             {"learning_rate", c.learning_rate},
             {"batch_size", c.batch_size},
             {"epochs_per_iteration", c.epochs_per_iteration},
             {"max_iterations", c.max_iterations},
             {"seed", c.seed},
             {"distance_sample_cap", c.distance_sample_cap},
             {"merge_score_floor", std::isfinite(c.merge_score_floor) ? Json(c.merge_score_floor) : Json(nullptr)}};
}

inline void from_json(const Json& j, RunConfig& c) {
    j.at("similarity_threshold").get_to(c.similarity_threshold);
    j.at("confidence").get_to(c.confidence);
    j.at("k").get_to(c.k);
    j.at("tau").get_to(c.tau);
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("batch_size").get_to(c.batch_size);
    j.at("epochs_per_iteration").get_to(c.epochs_per_iteration);
    j.at("max_iterations").get_to(c.max_iterations);
    j.at("seed").get_to(c.seed);
    j.at("distance_sample_cap").get_to(c.distance_sample_cap);
    const auto& floor = j.at("merge_score_floor");
    c.merge_score_floor = floor.is_null() ? -std::numeric_limits<double>::infinity() : floor.get<double>();
}

inline void to_json(Json& j, const Metrics& m) { j = Json{{"acc", m.acc}, {"nmi", m.nmi}, {"ari", m.ari}}; }

inline void from_json(const Json& j, Metrics& m) {
    j.at("acc").get_to(m.acc);
    j.at("nmi").get_to(m.nmi);
    j.at("ari").get_to(m.ari);
}

inline void to_json(Json& j, const MergeRecord& m) {
    j = Json{{"cluster", m.cluster},  {"members", m.members}, {"delta_q", m.delta_q},
             {"delta_k", m.delta_k},  {"distance", m.distance}, {"score", m.score},
             {"distance_sampled", m.distance_sampled}};
}

inline void from_json(const Json& j, MergeRecord& m) {
    j.at("cluster").get_to(m.cluster);
    j.at("members").get_to(m.members);
    j.at("delta_q").get_to(m.delta_q);
    j.at("delta_k").get_to(m.delta_k);
    j.at("distance").get_to(m.distance);
    j.at("score").get_to(m.score);
    j.at("distance_sampled").get_to(m.distance_sampled);
}

inline void to_json(Json& j, const IterationRecord& r) {
    j = Json{{"iteration", r.iteration},
             {"unlabeled_before", r.unlabeled_before},
             {"unlabeled_after", r.unlabeled_after},
             {"isolated_communities", r.isolated_communities},
             {"candidates", r.candidates},
             {"forced", r.forced},
             {"merges", r.merges},
             {"refine_losses", r.refine_losses},
             {"seconds", Json{{"detect", r.times.detect_seconds},
                              {"merge", r.times.merge_seconds},
                              {"refine", r.times.refine_seconds}}}};
}

inline void from_json(const Json& j, IterationRecord& r) {
    j.at("iteration").get_to(r.iteration);
    j.at("unlabeled_before").get_to(r.unlabeled_before);
    j.at("unlabeled_after").get_to(r.unlabeled_after);
    j.at("isolated_communities").get_to(r.isolated_communities);
    j.at("candidates").get_to(r.candidates);
    j.at("forced").get_to(r.forced);
    j.at("merges").get_to(r.merges);
    j.at("refine_losses").get_to(r.refine_losses);
    const auto& s = j.at("seconds");
    s.at("detect").get_to(r.times.detect_seconds);
    s.at("merge").get_to(r.times.merge_seconds);
    s.at("refine").get_to(r.times.refine_seconds);
}

inline void to_json(Json& j, const SeedClusterReport& s) {
    j = Json{{"cluster", s.cluster},
             {"size", s.size},
             {"communities", s.communities},
             {"main_before_screen", s.main_before_screen},
             {"main_after_screen", s.main_after_screen},
             {"rejected", s.rejected},
             {"parent_purity", detail::opt_json(s.parent_purity)},
             {"main_purity_before_screen", detail::opt_json(s.main_purity_before_screen)},
             {"main_purity_after_screen", detail::opt_json(s.main_purity_after_screen)}};
}

inline void from_json(const Json& j, SeedClusterReport& s) {
    j.at("cluster").get_to(s.cluster);
    j.at("size").get_to(s.size);
    j.at("communities").get_to(s.communities);
    j.at("main_before_screen").get_to(s.main_before_screen);
    j.at("main_after_screen").get_to(s.main_after_screen);
    j.at("rejected").get_to(s.rejected);
    s.parent_purity = detail::opt_from<double>(j.at("parent_purity"));
    s.main_purity_before_screen = detail::opt_from<double>(j.at("main_purity_before_screen"));
    s.main_purity_after_screen = detail::opt_from<double>(j.at("main_purity_after_screen"));
}

inline Json report_to_json(const RunReport& r) {
    Json j;
    j["config"] = r.config;
    j["dataset"] = Json{{"n", r.n}, {"d", r.d}};
    j["initial_metrics"] = detail::opt_json(r.initial_metrics);
    j["final_metrics"] = detail::opt_json(r.final_metrics);
    j["seeding"] = r.seeding;
    j["mean_purity"] = Json{
        {"parent_clusters", detail::opt_json(r.mean_purity(&SeedClusterReport::parent_purity))},
        {"main_before_screen", detail::opt_json(r.mean_purity(&SeedClusterReport::main_purity_before_screen))},
        {"main_after_screen", detail::opt_json(r.mean_purity(&SeedClusterReport::main_purity_after_screen))}};
    j["iterations"] = r.iterations;
    j["warnings"] = r.warnings;
    j["assumptions"] = r.assumptions;
    j["total_seconds"] = r.total_seconds;
    return j;
}

inline RunReport report_from_json(const Json& j) {
    RunReport r;
    j.at("config").get_to(r.config);
    j.at("dataset").at("n").get_to(r.n);
    j.at("dataset").at("d").get_to(r.d);
    r.initial_metrics = detail::opt_from<Metrics>(j.at("initial_metrics"));
    r.final_metrics = detail::opt_from<Metrics>(j.at("final_metrics"));
    j.at("seeding").get_to(r.seeding);
    j.at("iterations").get_to(r.iterations);
    j.at("warnings").get_to(r.warnings);
    j.at("assumptions").get_to(r.assumptions);
    j.at("total_seconds").get_to(r.total_seconds);
    return r;
}

inline std::string serialize_report(const RunReport& r) { return report_to_json(r).dump(2) + "\n"; }

inline RunReport parse_report(const std::string& text) { return report_from_json(Json::parse(text)); }

// =============================================================================
// Pipeline
// =============================================================================

struct PipelineOptions {
    /// Receives the unlabeled-pool graph of every merge round.
    std::function<void(int iteration, const WeightedGraph&)> on_pool_graph;
    /// Progress lines go here when set.
    std::ostream* log = nullptr;
};

struct PipelineResult {
    Labeling labels;
    RunReport report;
    ClusterState state;
    Matrix embeddings;  // after the last refinement
};

namespace detail {

template <typename F>
auto in_phase(const char* phase, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const Error& e) {
        throw Error(std::string(phase) + " failed: " + e.what());
    }
}

}  // namespace detail

/// Seeding, then rounds of (refine, detect isolated communities, merge) until
/// the unlabeled pool is empty or `max_iterations` rounds have run; a final
/// forced round then absorbs whatever is left. Seeding is the initialization
/// phase and never refines; the forced round does not refine either.
inline PipelineResult run_pipeline(const Dataset& data, const RunConfig& cfg, const PipelineOptions& opts = {}) {
    using Clock = std::chrono::steady_clock;
    auto seconds_since = [](Clock::time_point t) {
        return std::chrono::duration<double>(Clock::now() - t).count();
    };
    const auto start = Clock::now();
    detail::in_phase("configuration", [&] {
        cfg.validate();
        if (static_cast<std::size_t>(cfg.k) > data.size()) {
            throw Error("k = " + std::to_string(cfg.k) + " exceeds the sample count " + std::to_string(data.size()));
        }
    });

    PipelineResult out;
    RunReport& report = out.report;
    report.config = cfg;
    report.n = data.size();
    report.d = data.dim();
    report.assumptions = engine_assumptions();

    SeedingResult seeded = detail::in_phase("seeding", [&] { return seed_clusters(data, cfg); });
    const auto& truth = data.ground_truth();
    if (truth) report.initial_metrics = evaluate(seeded.initial_labels, *truth);
    for (std::size_t c = 0; c < seeded.clusters.size(); ++c) {
        const auto& sc = seeded.clusters[c];
        SeedClusterReport s;
        s.cluster = static_cast<int>(c);
        s.size = sc.members.size();
        s.communities = sc.community_count;
        s.main_before_screen = sc.main_before_screen.size();
        s.main_after_screen = sc.main.size();
        s.rejected = sc.rejected.size();
        if (truth) {
            s.parent_purity = purity(Community(0, sc.members), *truth);
            s.main_purity_before_screen = purity(sc.main_before_screen, *truth);
            s.main_purity_after_screen = purity(sc.main, *truth);
        }
        report.seeding.push_back(s);
    }

    ClusterState state = std::move(seeded.state);
    Matrix rows = data.embeddings();
    Matrix unit = detail::in_phase("similarity", [&] { return normalized_rows(rows); });

    auto log = [&](const std::string& line) {
        if (opts.log) *opts.log << line << '\n';
    };
    log("seeding: " + std::to_string(state.unlabeled.size()) + " of " + std::to_string(data.size()) +
        " samples unlabeled");

    auto round = [&](bool forced) {
        ++state.iteration;
        IterationRecord rec;
        double refine_seconds = 0.0;
        std::vector<double> losses;
        if (!forced && cfg.epochs_per_iteration > 0) {
            auto t = Clock::now();
            auto refined = detail::in_phase("refinement", [&] {
                return refine_embeddings(state, rows, cfg,
                                         substream_seed(cfg.seed, "refine", static_cast<std::uint64_t>(state.iteration)));
            });
            if (refined.skipped) {
                report.warnings.push_back("iteration " + std::to_string(state.iteration) + ": " + refined.warning);
            } else {
                rows = std::move(refined.embeddings);
                unit = detail::in_phase("similarity", [&] { return normalized_rows(rows); });
                losses = std::move(refined.epoch_losses);
            }
            refine_seconds = seconds_since(t);
        }
        MergeRoundOptions mo;
        mo.forced = forced;
        mo.score_floor = cfg.merge_score_floor;
        mo.distance_cap = static_cast<std::size_t>(cfg.distance_sample_cap);
        mo.threshold = cfg.similarity_threshold;
        mo.seed = substream_seed(cfg.seed, "sampling", static_cast<std::uint64_t>(state.iteration));
        WeightedGraph pool_graph;
        rec = detail::in_phase("merging", [&] {
            return merge_round(state, rows, unit, mo, opts.on_pool_graph ? &pool_graph : nullptr);
        });
        if (opts.on_pool_graph && rec.unlabeled_before > 0) opts.on_pool_graph(state.iteration, pool_graph);
        rec.refine_losses = std::move(losses);
        rec.times.refine_seconds = refine_seconds;
        detail::in_phase("merging", [&] { state.check_invariant(); });
        log("iteration " + std::to_string(rec.iteration) + (forced ? " (final)" : "") + ": unlabeled " +
            std::to_string(rec.unlabeled_before) + " -> " + std::to_string(rec.unlabeled_after) + ", " +
            std::to_string(rec.merges.size()) + " merges from " + std::to_string(rec.isolated_communities) +
            " isolated communities");
        report.iterations.push_back(rec);
    };

    while (!state.unlabeled.empty() && state.iteration < cfg.max_iterations) round(false);
    if (!state.unlabeled.empty()) round(true);
    state.terminated = true;

    out.labels = state.labeling();
    if (std::find(out.labels.begin(), out.labels.end(), -1) != out.labels.end()) {
        throw Error("pipeline finished with unlabeled samples");
    }
    if (truth) report.final_metrics = evaluate(out.labels, *truth);
    report.total_seconds = seconds_since(start);
    state.trace = report.iterations;
    out.state = std::move(state);
    out.embeddings = std::move(rows);
    return out;
}

}  // namespace dcvcd
