#include <gtest/gtest.h>

#include <cmath>

#include "dcvcd/community.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dcvcd;

namespace {

WeightedGraph two_triangles() {
    return WeightedGraph::from_edges({0, 1, 2, 3, 4, 5},
                                     {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1}});
}

WeightedGraph cliques_with_bridge() {
    std::vector<Edge> e;
    for (NodeId base : {NodeId{0}, NodeId{5}}) {
        for (NodeId i = 0; i < 5; ++i)
            for (NodeId j = i + 1; j < 5; ++j) e.push_back({base + i, base + j, 1.0});
    }
    e.push_back({4, 5, 1.0});
    return WeightedGraph::from_edges(testutil::range(0, 10), e);
}

std::vector<int> local_labels(const WeightedGraph& g, const Partition& p) {
    std::vector<int> labels(g.node_count(), -1);
    for (std::size_t c = 0; c < p.size(); ++c)
        for (NodeId v : p.communities()[c].members) labels[g.local(v)] = static_cast<int>(c);
    return labels;
}

Partition parts(const NodeSet& nodes, std::vector<NodeSet> groups) {
    std::vector<Community> cs;
    for (std::size_t i = 0; i < groups.size(); ++i) cs.emplace_back(static_cast<int>(i), groups[i]);
    return Partition(nodes, cs);
}

}  // namespace

TEST(Modularity, SingleCommunityIsZero) {
    auto g = oracle::random_graph(12, 0.4, 1);
    EXPECT_NEAR(modularity(g, parts(g.nodes(), {g.nodes()})), 0.0, 1e-12);
}

TEST(Modularity, TwoTriangles) {
    auto g = two_triangles();
    EXPECT_NEAR(modularity(g, parts(g.nodes(), {{0, 1, 2}, {3, 4, 5}})), 0.5, 1e-12);
}

TEST(Modularity, SingleEdgeSplit) {
    auto g = WeightedGraph::from_edges({0, 1}, {{0, 1, 1.0}});
    EXPECT_NEAR(modularity(g, Partition::singletons({0, 1})), -0.5, 1e-12);
}

TEST(Modularity, EdgelessIsZero) {
    auto g = WeightedGraph::from_edges({0, 1, 2}, {});
    EXPECT_EQ(modularity(g, Partition::singletons({0, 1, 2})), 0.0);
}

TEST(Modularity, PartitionMismatchIsAnError) {
    auto g = two_triangles();
    EXPECT_THROW(modularity(g, Partition::singletons({0, 1, 2})), Error);
}

TEST(Modularity, MatchesDoubleSumOracle) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto g = oracle::random_graph(9, 0.35, s);
        std::mt19937_64 rng(s);
        std::vector<int> labels(9);
        for (auto& l : labels) l = static_cast<int>(rng() % 3);
        auto p = Partition::from_labels(g.nodes(), labels);
        EXPECT_NEAR(modularity(g, p), oracle::modularity(g, labels), 1e-12) << "seed " << s;
    }
}

TEST(Leiden, TwoTriangles) {
    auto g = two_triangles();
    auto r = leiden(g, 0);
    EXPECT_EQ(r.partition, parts(g.nodes(), {{0, 1, 2}, {3, 4, 5}}));
    EXPECT_NEAR(r.modularity, 0.5, 1e-12);
    EXPECT_NEAR(oracle::max_modularity(g).q, 0.5, 1e-12);
}

TEST(Leiden, EdgelessGivesSingletons) {
    auto g = WeightedGraph::from_edges(testutil::range(0, 5), {});
    auto r = leiden(g, 3);
    EXPECT_EQ(r.partition, Partition::singletons(g.nodes()));
    EXPECT_EQ(r.modularity, 0.0);
}

TEST(Leiden, TwoCliquesWithBridge) {
    auto g = cliques_with_bridge();
    auto best = oracle::max_modularity(g);
    auto expected = parts(g.nodes(), {{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}});
    EXPECT_EQ(Partition::from_labels(g.nodes(), best.labels), expected);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto r = leiden(g, seed);
        EXPECT_EQ(r.partition, expected);
        EXPECT_NEAR(r.modularity, best.q, 1e-9);
    }
}

TEST(Louvain, Examples) {
    auto g = two_triangles();
    auto r = louvain(g, 0);
    EXPECT_EQ(r.partition, parts(g.nodes(), {{0, 1, 2}, {3, 4, 5}}));
    EXPECT_NEAR(r.modularity, 0.5, 1e-12);
    auto e = WeightedGraph::from_edges({0, 1, 2}, {});
    EXPECT_EQ(louvain(e, 0).partition, Partition::singletons(e.nodes()));
    EXPECT_EQ(detect(g, Algorithm::louvain, 0).algorithm, Algorithm::louvain);
}

TEST(Connectivity, Examples) {
    auto path = WeightedGraph::from_edges({0, 1, 2, 3}, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}});
    EXPECT_TRUE(is_internally_connected(Community(0, {2}), path));
    EXPECT_FALSE(is_internally_connected(Community(0, {0, 2}), path));
    EXPECT_TRUE(is_internally_connected(Community(0, {0, 1, 2, 3}), path));
}

TEST(LeidenProperty, OptimalOnMicroGraphs) {
    for (std::uint64_t s = 0; s < 12; ++s) {
        std::size_t n = 4 + s % 5;
        auto g = oracle::random_graph(n, 0.3 + 0.05 * static_cast<double>(s % 6), 100 + s);
        auto r = leiden(g, s);
        EXPECT_NEAR(r.modularity, oracle::max_modularity(g).q, 1e-9) << "graph " << s;
        EXPECT_NEAR(r.modularity, oracle::modularity(g, local_labels(g, r.partition)), 1e-12);
    }
}

TEST(LeidenProperty, CommunitiesAreConnected) {
    for (std::uint64_t s = 0; s < 30; ++s) {
        auto g = oracle::random_graph(20 + 5 * (s % 10), 0.02 + 0.02 * static_cast<double>(s % 7), 500 + s);
        auto r = leiden(g, s);
        for (const auto& c : r.partition.communities()) EXPECT_TRUE(is_internally_connected(c, g));
    }
}

TEST(LeidenProperty, PassModularityIsMonotone) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto g = oracle::random_graph(60, 0.08, 900 + s);
        for (auto algo : {Algorithm::leiden, Algorithm::louvain}) {
            auto r = detect(g, algo, s);
            ASSERT_FALSE(r.pass_modularity.empty());
            for (std::size_t i = 1; i < r.pass_modularity.size(); ++i) {
                EXPECT_GE(r.pass_modularity[i], r.pass_modularity[i - 1] - 1e-12) << to_string(algo) << " " << s;
            }
        }
    }
}

TEST(LeidenProperty, Deterministic) {
    auto g = oracle::random_graph(80, 0.06, 42);
    for (auto algo : {Algorithm::leiden, Algorithm::louvain}) {
        auto a = detect(g, algo, 7);
        auto b = detect(g, algo, 7);
        EXPECT_EQ(a.partition, b.partition);
        EXPECT_EQ(a.modularity, b.modularity);
    }
}
