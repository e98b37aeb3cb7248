#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dcvcd/io.hpp"
#include "dcvcd/merging.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dcvcd;
using testutil::rows;

namespace {

MergeCandidate cand(int main, NodeSet iso, double q, double k, double t) {
    MergeCandidate c;
    c.main_id = main;
    c.iso = Community(0, std::move(iso));
    c.delta_q = q;
    c.delta_k = k;
    c.distance_t = t;
    return c;
}

Dataset random_rows(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> r(n, std::vector<double>(d));
    for (auto& row : r)
        for (auto& x : row) x = g(rng) + 0.8;  // shifted so many pairs clear the threshold
    return rows(r);
}

}  // namespace

TEST(DeltaQ, NoCrossEdges) {
    // main: two identical rows; iso: two identical rows orthogonal to main.
    auto data = rows({{1, 0}, {1, 0}, {0, 1}, {0, 1}});
    double dq = delta_modularity(data, Community(0, {0, 1}), Community(1, {2, 3}), 0.5);
    // W = 2, D_main = D_iso = 2.
    EXPECT_NEAR(dq, -2.0 * 2.0 / (2.0 * 4.0), 1e-12);
    EXPECT_LE(dq, 0.0);
}

TEST(DeltaQ, SingleEdge) {
    auto data = rows({{1, 0}, {1, 0}});
    EXPECT_NEAR(delta_modularity(data, Community(0, {0}), Community(1, {1}), 0.5), 0.5, 1e-12);
}

TEST(DeltaQ, TwoTrianglesPlusBridge) {
    // Hand evaluation: split Q = 2 (3/7 - (7/14)^2) = 6/7 - 1/2, merged Q = 0.
    const double expected = 0.0 - (6.0 / 7.0 - 0.5);
    EXPECT_NEAR(delta_modularity(UnionWeights{3.0, 3.0, 1.0}), expected, 1e-12);
    auto g = WeightedGraph::from_edges(testutil::range(0, 6), {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1},
                                                              {4, 5, 1}, {3, 5, 1}, {2, 3, 1}});
    double brute = oracle::modularity(g, {0, 0, 0, 0, 0, 0}) - oracle::modularity(g, {0, 0, 0, 1, 1, 1});
    EXPECT_NEAR(brute, expected, 1e-12);
}

TEST(DeltaQ, OverlapIsAnError) {
    auto data = rows({{1, 0}, {1, 0}});
    EXPECT_THROW(delta_modularity(data, Community(0, {0, 1}), Community(1, {1}), 0.5), Error);
}

TEST(DeltaQ, MatchesBruteForceOnUnionGraphs) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 2 + rng() % 11;
        auto data = random_rows(n, 4, rng);
        std::size_t split = 1 + rng() % (n - 1);
        Community main(0, testutil::range(0, split));
        Community iso(1, testutil::range(split, n));
        double threshold = 0.1 * static_cast<double>(rng() % 6);
        auto g = build_graph(data, testutil::range(0, n), threshold);
        std::vector<int> merged(n, 0), apart(n, 0);
        for (std::size_t i = split; i < n; ++i) apart[i] = 1;
        double brute = oracle::modularity(g, merged) - oracle::modularity(g, apart);
        EXPECT_NEAR(delta_modularity(data, main, iso, threshold), brute, 1e-9) << "trial " << trial;
    }
}

TEST(DeltaK, IsolatedSingletonCannotRaiseMean) {
    auto data = rows({{1, 0}, {1, 0.01}, {0, 1}});
    EXPECT_LE(delta_avg_degree(data, Community(0, {0, 1}), Community(1, {2}), 0.5), 0.0);
}

TEST(DeltaK, TriangleCompletion) {
    auto data = rows({{1, 0}, {1, 0}, {1, 0}});
    EXPECT_NEAR(delta_avg_degree(data, Community(0, {0, 1}), Community(1, {2}), 0.5), 1.0, 1e-12);
}

TEST(DeltaK, CliquesFullyCrossConnected) {
    auto data = rows({{2, 1}, {2, 1}, {2, 1}, {2, 1}, {2, 1}});
    double dk = delta_avg_degree(data, Community(0, {0, 1, 2}), Community(1, {3, 4}), 0.5);
    EXPECT_NEAR(dk, (5.0 - 1.0) - (3.0 - 1.0), 1e-12);
}

TEST(Distance, Examples) {
    auto data = rows({{1, 2}, {1, 2}, {0, 0}, {3, 4}});
    EXPECT_EQ(community_distance(data, Community(0, {0}), Community(1, {1}), 256, 0), 0.0);
    EXPECT_NEAR(community_distance(data, Community(0, {2}), Community(1, {3}), 256, 0), 5.0, 1e-15);

    auto four = rows({{0, 0}, {1, 0}, {0, 3}, {4, 0}});
    double expected = (3.0 + 4.0 + std::sqrt(10.0) + 3.0) / 4.0;
    EXPECT_NEAR(community_distance(four, Community(0, {0, 1}), Community(1, {2, 3}), 256, 0), expected, 1e-15);
}

TEST(Distance, SamplingAboveCap) {
    auto data = generate_blobs(2, 100, 3, 0.3, 1);
    Community a(0, testutil::range(0, 50)), b(1, testutil::range(50, 100));
    auto full = community_distance_ex(data.embeddings(), a, b, 256, 3);
    EXPECT_FALSE(full.sampled);
    auto s1 = community_distance_ex(data.embeddings(), a, b, 10, 3);
    auto s2 = community_distance_ex(data.embeddings(), a, b, 10, 3);
    EXPECT_TRUE(s1.sampled);
    EXPECT_EQ(s1.value, s2.value);
    EXPECT_NEAR(s1.value, full.value, 0.5 * full.value);
}

TEST(Ensemble, SingleCandidate) {
    std::vector<MergeCandidate> c{cand(0, {1}, 0.2, 0.5, 3.0)};
    ensemble_scores(c);
    EXPECT_DOUBLE_EQ(c[0].score_l, 1.0);
}

TEST(Ensemble, SmallerDistanceWins) {
    std::vector<MergeCandidate> c{cand(0, {1}, 0.2, 0.5, 3.0), cand(0, {2}, 0.2, 0.5, 2.0)};
    ensemble_scores(c);
    EXPECT_GT(c[1].score_l, c[0].score_l);
}

TEST(Ensemble, ZeroTermContributesNothing) {
    std::vector<MergeCandidate> c{cand(0, {1}, 0.0, 0.5, 1.0), cand(0, {2}, 0.0, 0.25, 1.0)};
    ensemble_scores(c);
    EXPECT_DOUBLE_EQ(c[0].score_l, 1.0 - 1.0);
    EXPECT_DOUBLE_EQ(c[1].score_l, 0.5 - 1.0);
}

TEST(Ensemble, EmptyIsAnError) {
    std::vector<MergeCandidate> none;
    EXPECT_THROW(ensemble_scores(none), Error);
}

TEST(EnsembleProperty, ScaleInvariance) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<MergeCandidate> base;
        for (int m = 0; m < 3; ++m)
            for (NodeId i = 0; i < 4; ++i)
                base.push_back(cand(m, {i}, u(rng), u(rng), std::abs(u(rng)) + 0.01));
        auto scaled = base;
        double f = 0.01 + 10.0 * std::abs(u(rng));
        int term = trial % 3;
        for (auto& c : scaled) (term == 0 ? c.delta_q : term == 1 ? c.delta_k : c.distance_t) *= f;
        ensemble_scores(base);
        ensemble_scores(scaled);
        for (int m = 0; m < 3; ++m) {
            auto best = [&](const std::vector<MergeCandidate>& v) {
                std::size_t at = 0;
                double top = -1e300;
                for (std::size_t i = 0; i < v.size(); ++i)
                    if (v[i].main_id == m && v[i].score_l > top) top = v[i].score_l, at = i;
                return at;
            };
            EXPECT_EQ(best(base), best(scaled));
        }
        for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(base[i].score_l, scaled[i].score_l, 1e-12);
    }
}

TEST(Resolve, CompetitionGoesToHigherScore) {
    std::vector<MergeCandidate> c{cand(0, {10}, 0, 0, 0), cand(1, {10}, 0, 0, 0), cand(1, {20}, 0, 0, 0)};
    c[0].score_l = 0.9;
    c[1].score_l = 0.95;
    c[2].score_l = 0.3;
    // Main 1 wins iso {10}; main 0 has no other candidate.
    auto chosen = resolve_merges(c, {});
    EXPECT_EQ(chosen, (std::vector<std::size_t>{1}));

    c[1].score_l = 0.5;
    chosen = resolve_merges(c, {});
    EXPECT_EQ(chosen, (std::vector<std::size_t>{0, 2}));
}

TEST(Resolve, ForcedRoundTakesEverything) {
    std::vector<MergeCandidate> c{cand(0, {1}, 0, 0, 0), cand(0, {2}, 0, 0, 0), cand(1, {1}, 0, 0, 0)};
    c[0].score_l = 1.0;
    c[1].score_l = 0.8;
    c[2].score_l = 0.1;
    MergeRoundOptions forced;
    forced.forced = true;
    EXPECT_EQ(resolve_merges(c, forced), (std::vector<std::size_t>{0, 1}));
    MergeRoundOptions floor;
    floor.score_floor = 2.0;
    EXPECT_TRUE(resolve_merges(c, floor).empty());
}

TEST(MergeRound, OneMainOneIso) {
    auto data = rows({{1, 0}, {1, 0.01}, {1, 0.02}, {1, 0.03}});
    ClusterState s;
    s.n = 4;
    s.k = 1;
    s.main_communities.emplace(0, Community(0, {0, 1}));
    s.unlabeled = {2, 3};
    auto unit = normalized_rows(data.embeddings());
    auto rec = merge_round(s, data.embeddings(), unit, {});
    EXPECT_EQ(rec.merges.size(), 1u);
    EXPECT_TRUE(s.unlabeled.empty());
    EXPECT_TRUE(s.terminated);
    EXPECT_EQ(s.main_communities.at(0).members, (NodeSet{0, 1, 2, 3}));
}

TEST(MergeRound, EmptyPool) {
    auto data = rows({{1, 0}, {1, 0.01}});
    ClusterState s;
    s.n = 2;
    s.k = 1;
    s.main_communities.emplace(0, Community(0, {0, 1}));
    auto before = s.main_communities.at(0).members;
    auto unit = normalized_rows(data.embeddings());
    auto rec = merge_round(s, data.embeddings(), unit, {});
    EXPECT_TRUE(s.terminated);
    EXPECT_TRUE(rec.merges.empty());
    EXPECT_EQ(s.main_communities.at(0).members, before);
}

TEST(MergeRoundProperty, DisjointnessAndShrinkingPool) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto data = generate_blobs(3, 120, 5, 0.5, seed);
        ClusterState s;
        s.n = data.size();
        s.k = 3;
        for (int c = 0; c < 3; ++c) s.main_communities.emplace(c, Community(c, testutil::range(c * 10, c * 10 + 10)));
        s.unlabeled = testutil::range(30, 120);
        auto unit = normalized_rows(data.embeddings());
        MergeRoundOptions opts;
        opts.seed = seed;
        for (int round = 0; round < 200 && !s.unlabeled.empty(); ++round) {
            std::size_t before = s.unlabeled.size();
            merge_round(s, data.embeddings(), unit, opts);
            ASSERT_NO_THROW(s.check_invariant());
            ASSERT_LT(s.unlabeled.size(), before);
        }
        EXPECT_TRUE(s.unlabeled.empty());
    }
}
