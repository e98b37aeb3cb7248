#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dcvcd/metrics.hpp"
#include "oracles.hpp"

using namespace dcvcd;

namespace {

std::vector<int> random_labels(std::size_t n, int k, std::mt19937_64& rng) {
    std::vector<int> out(n);
    for (auto& x : out) x = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
    return out;
}

std::vector<int> relabel(const std::vector<int>& v, const std::vector<int>& perm) {
    std::vector<int> out;
    for (int x : v) out.push_back(perm[x]);
    return out;
}

}  // namespace

TEST(Accuracy, Identity) {
    std::vector<int> t{0, 1, 2, 1, 0};
    EXPECT_EQ(accuracy(t, t), 1.0);
    EXPECT_EQ(accuracy(relabel(t, {2, 0, 1}), t), 1.0);
}

TEST(Accuracy, TwoByTwoContingency) {
    // Cluster 0 holds 5 of class 0 and 1 of class 1; cluster 1 holds 2 and 4.
    std::vector<int> pred, truth;
    auto add = [&](int p, int t, int count) {
        for (int i = 0; i < count; ++i) pred.push_back(p), truth.push_back(t);
    };
    add(0, 0, 5);
    add(0, 1, 1);
    add(1, 0, 2);
    add(1, 1, 4);
    EXPECT_DOUBLE_EQ(accuracy(pred, truth), 0.75);
}

TEST(Accuracy, LengthMismatchIsAnError) {
    std::vector<int> a{0, 1}, b{0};
    EXPECT_THROW(accuracy(a, b), Error);
    EXPECT_THROW(nmi(a, b), Error);
    EXPECT_THROW(ari(a, b), Error);
}

TEST(Accuracy, UnequalClusterCounts) {
    std::vector<int> pred{0, 1, 2, 3}, truth{0, 0, 1, 1};
    EXPECT_DOUBLE_EQ(accuracy(pred, truth), 0.5);
    EXPECT_DOUBLE_EQ(accuracy(truth, pred), 0.5);
}

TEST(AccuracyProperty, MatchesBruteForce) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        int kp = 1 + static_cast<int>(rng() % 6), kt = 1 + static_cast<int>(rng() % 6);
        std::size_t n = 5 + rng() % 40;
        auto pred = random_labels(n, kp, rng), truth = random_labels(n, kt, rng);
        EXPECT_EQ(accuracy(pred, truth), oracle::accuracy(pred, truth));
    }
}

TEST(AccuracyProperty, PermutationInvariant) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        auto pred = random_labels(30, 4, rng), truth = random_labels(30, 4, rng);
        std::vector<int> p{0, 1, 2, 3}, q{0, 1, 2, 3};
        std::shuffle(p.begin(), p.end(), rng);
        std::shuffle(q.begin(), q.end(), rng);
        EXPECT_EQ(accuracy(pred, truth), accuracy(relabel(pred, p), relabel(truth, q)));
    }
}

TEST(Nmi, Examples) {
    std::vector<int> t{0, 0, 1, 1, 2};
    EXPECT_NEAR(nmi(t, t), 1.0, 1e-12);
    std::vector<int> constant{0, 0, 0, 0}, balanced{0, 0, 1, 1};
    EXPECT_EQ(nmi(constant, balanced), 0.0);
    EXPECT_EQ(nmi(constant, constant), 1.0);
}

TEST(Nmi, FourPointHandComputed) {
    // pred {01|23}; truth {0|123}. Table [[1,1],[0,2]].
    std::vector<int> pred{0, 0, 1, 1}, truth{0, 1, 1, 1};
    const double hp = std::log(2.0);
    const double ht = -(0.25 * std::log(0.25) + 0.75 * std::log(0.75));
    const double mi = 0.25 * std::log(2.0) + 0.25 * std::log(2.0 / 3.0) + 0.5 * std::log(4.0 / 3.0);
    EXPECT_NEAR(nmi(pred, truth), mi / std::sqrt(hp * ht), 1e-12);
    EXPECT_NEAR(nmi(pred, truth), 0.345592, 1e-6);
}

TEST(NmiProperty, MatchesEntropyOracleAndIsSymmetric) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        auto pred = random_labels(40, 1 + static_cast<int>(rng() % 5), rng);
        auto truth = random_labels(40, 1 + static_cast<int>(rng() % 5), rng);
        EXPECT_NEAR(nmi(pred, truth), oracle::nmi(pred, truth), 1e-12);
        EXPECT_NEAR(nmi(pred, truth), nmi(truth, pred), 1e-12);
    }
}

TEST(Ari, Examples) {
    std::vector<int> t{0, 0, 1, 1, 2};
    EXPECT_NEAR(ari(t, t), 1.0, 1e-12);
    std::vector<int> singletons{0, 1, 2, 3}, one{0, 0, 0, 0};
    EXPECT_NEAR(ari(singletons, one), 0.0, 1e-12);
}

TEST(AriProperty, MatchesPairCountingAndIsSymmetric) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        int kp = 1 + static_cast<int>(rng() % 6), kt = 1 + static_cast<int>(rng() % 6);
        std::size_t n = 5 + rng() % 40;
        auto pred = random_labels(n, kp, rng), truth = random_labels(n, kt, rng);
        EXPECT_NEAR(ari(pred, truth), oracle::ari(pred, truth), 1e-12);
        EXPECT_NEAR(ari(pred, truth), ari(truth, pred), 1e-12);
    }
}

TEST(Purity, Examples) {
    std::vector<int> truth{0, 0, 0, 1, 1};
    EXPECT_EQ(purity(Community(0, {0, 1, 2}), truth), 1.0);
    EXPECT_EQ(purity(Community(0, {0, 1, 2, 3}), truth), 0.75);
    EXPECT_EQ(purity(Community(0, {4}), truth), 1.0);
    EXPECT_THROW(purity(Community{}, truth), Error);
}
