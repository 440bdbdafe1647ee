#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "asds/eval.hpp"
#include "asds/rng.hpp"
#include "support/oracles.hpp"

TEST_CASE("auroc hand examples", "[eval]") {
    REQUIRE(asds::auroc({1.0, 2.0}, {3.0, 4.0}) == 1.0);
    REQUIRE(asds::auroc({3.0, 4.0}, {1.0, 2.0}) == 0.0);
    // Pairs (2>1) win, (2<3) loss, (4>1) win, (4>3) win -> 3/4.
    REQUIRE(asds::auroc({1.0, 3.0}, {2.0, 4.0}) == 0.75);
    // A single tied pair counts half.
    REQUIRE(asds::auroc({1.0}, {1.0}) == 0.5);
}

TEST_CASE("auroc equals exhaustive pairwise counting with ties", "[eval]") {
    asds::Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        // Integer-valued scores on a small grid force plenty of ties.
        const std::size_t n = 1 + rng.below(40);
        const std::size_t p = 1 + rng.below(40);
        std::vector<double> neg(n), pos(p);
        for (auto& v : neg) v = double(rng.below(8));
        for (auto& v : pos) v = double(rng.below(8));
        REQUIRE(asds::auroc(neg, pos) == oracle::auroc_pairwise(neg, pos)); // bit-exact
    }
}

TEST_CASE("auroc of mirrored classes sums to one", "[eval]") {
    asds::Rng rng(11);
    std::vector<double> a(25), b(30);
    for (auto& v : a) v = double(rng.below(10));
    for (auto& v : b) v = double(rng.below(10));
    REQUIRE(asds::auroc(a, b) + asds::auroc(b, a) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("auroc requires both classes", "[eval]") {
    REQUIRE_THROWS_AS(asds::auroc({}, {1.0}), asds::ArgumentError);
    REQUIRE_THROWS_AS(asds::auroc({1.0}, {}), asds::ArgumentError);
}

TEST_CASE("threshold_at_fpr flags at most the allowed negatives", "[eval]") {
    // Ten distinct scores, fpr 0.2: the two largest may be flagged.
    std::vector<double> neg;
    for (int i = 1; i <= 10; ++i) neg.push_back(double(i));
    const double tau = asds::threshold_at_fpr(neg, 0.2);
    REQUIRE(tau == 8.0);
    std::size_t flagged = 0;
    for (double s : neg) flagged += s > tau;
    REQUIRE(flagged == 2);

    // fpr 0 flags nothing: the threshold is the maximum itself.
    REQUIRE(asds::threshold_at_fpr(neg, 0.0) == 10.0);
}

TEST_CASE("threshold_at_fpr bound holds on random tied data", "[eval]") {
    asds::Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + rng.below(100);
        std::vector<double> neg(n);
        for (auto& v : neg) v = double(rng.below(12)); // ties likely
        for (double fpr : {0.0, 0.05, 0.1, 0.3}) {
            const double tau = asds::threshold_at_fpr(neg, fpr);
            std::size_t flagged = 0;
            for (double s : neg) flagged += s > tau;
            REQUIRE(flagged <= std::size_t(fpr * double(n)));
        }
    }
}

TEST_CASE("threshold_at_fpr is exact for distinct scores", "[eval]") {
    asds::Rng rng(17);
    std::vector<double> neg(40);
    for (auto& v : neg) v = rng.uniform(); // distinct w.p. 1
    const double fpr = 0.25;
    const double tau = asds::threshold_at_fpr(neg, fpr);
    std::size_t flagged = 0;
    for (double s : neg) flagged += s > tau;
    REQUIRE(flagged == std::size_t(fpr * 40)); // exactly floor(fpr n)
}

TEST_CASE("threshold_at_fpr validates arguments", "[eval]") {
    REQUIRE_THROWS_AS(asds::threshold_at_fpr({}, 0.1), asds::ArgumentError);
    REQUIRE_THROWS_AS(asds::threshold_at_fpr({1.0}, 1.0), asds::ArgumentError);
    REQUIRE_THROWS_AS(asds::threshold_at_fpr({1.0}, -0.1), asds::ArgumentError);
}

TEST_CASE("fooling_rate counts scores at or below the threshold", "[eval]") {
    REQUIRE(asds::fooling_rate({1.0, 2.0, 3.0}, 2.0) == Catch::Approx(2.0 / 3.0));
    REQUIRE(asds::fooling_rate({5.0}, 2.0) == 0.0);
    REQUIRE(asds::fooling_rate({1.0}, 2.0) == 1.0);
    REQUIRE_THROWS_AS(asds::fooling_rate({}, 0.0), asds::ArgumentError);
}

TEST_CASE("fooling rate is non-increasing as the fpr budget grows", "[eval]") {
    asds::Rng rng(19);
    std::vector<double> neg(200), adv(80);
    for (auto& v : neg) v = rng.normal();
    for (auto& v : adv) v = rng.normal() + 0.5;
    double prev = 1.0;
    for (double fpr : {0.01, 0.05, 0.1, 0.2, 0.4}) {
        const double f = asds::fooling_rate(adv, asds::threshold_at_fpr(neg, fpr));
        REQUIRE(f <= prev + 1e-12); // larger budget, lower threshold, fewer evade
        REQUIRE(f >= 0.0);
        REQUIRE(f <= 1.0);
        prev = f;
    }
}
