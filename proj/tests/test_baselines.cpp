#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "asds/baselines.hpp"
#include "asds/eval.hpp"
#include "asds/rng.hpp"

using asds::LidResult;
using asds::MdaModel;
using asds::NeighborContext;
using asds::TapNeighbors;
using asds::Tensor;

TEST_CASE("lid matches the closed-form worked example", "[baselines]") {
    // r = (1, 2, 4), k = 3:
    //   mean log-ratio = (ln(1/4) + ln(2/4) + ln(4/4)) / 3 = -ln 2
    //   LID = 1 / ln 2
    const LidResult r = asds::lid_score({1.0, 2.0, 4.0});
    REQUIRE_FALSE(r.degenerate);
    REQUIRE(r.value == Catch::Approx(1.0 / std::log(2.0)).epsilon(1e-12));
    REQUIRE(r.value == Catch::Approx(1.442695).margin(1e-6));
}

TEST_CASE("lid equals a direct re-evaluation of the formula", "[baselines]") {
    asds::Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 2 + rng.below(30);
        std::vector<double> r(k);
        for (auto& v : r) v = rng.uniform(0.01, 5.0);
        std::sort(r.begin(), r.end());
        if (r.front() == r.back()) continue;

        double acc = 0;
        for (double v : r) acc += std::log(v / r.back());
        const double expect = -1.0 / (acc / double(k));
        REQUIRE(asds::lid_score(r).value == Catch::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("lid recovers the dimension of sampled radial data", "[baselines]") {
    // For points uniform in a d-ball the kNN radii about the center have
    // CDF t^d, so r = u^(1/d) samples them directly and the estimator
    // should read back d (relative error ~ 1/sqrt(k)).
    asds::Rng rng(7);
    for (int d : {2, 5, 9}) {
        const std::size_t k = 800;
        std::vector<double> r(k);
        for (auto& v : r) v = std::pow(rng.uniform(), 1.0 / double(d));
        std::sort(r.begin(), r.end());
        const LidResult est = asds::lid_score(r);
        REQUIRE_FALSE(est.degenerate);
        REQUIRE(est.value == Catch::Approx(double(d)).epsilon(0.15));
    }
}

TEST_CASE("lid flags the all-equal degenerate case", "[baselines]") {
    const LidResult r = asds::lid_score({2.0, 2.0, 2.0});
    REQUIRE(r.degenerate);
    REQUIRE(std::isinf(r.value));
}

TEST_CASE("lid handles a zero smallest distance as the IEEE limit", "[baselines]") {
    const LidResult r = asds::lid_score({0.0, 1.0, 2.0});
    REQUIRE_FALSE(r.degenerate);
    REQUIRE(r.value == 0.0);
}

TEST_CASE("lid validates its input", "[baselines]") {
    REQUIRE_THROWS_AS(asds::lid_score({1.0}), asds::ArgumentError);          // too short
    REQUIRE_THROWS_AS(asds::lid_score({2.0, 1.0}), asds::ArgumentError);     // not ascending
    REQUIRE_THROWS_AS(asds::lid_score({0.0, 0.0}), asds::ArgumentError);     // r_k == 0
}

namespace {

NeighborContext two_tap_context() {
    NeighborContext ctx;
    TapNeighbors a;
    a.indices = {5, 3, 1};
    a.distances = {4.0, 2.0, 1.0}; // descending, as retrieval emits
    a.labels = {0, 1, 0};
    TapNeighbors b;
    b.indices = {2, 9, 4};
    b.distances = {9.0, 3.0, 1.0};
    b.labels = {1, 1, 2};
    ctx.taps = {a, b};
    return ctx;
}

} // namespace

TEST_CASE("per-tap lid reverses the descending context distances", "[baselines]") {
    const NeighborContext ctx = two_tap_context();
    const auto scores = asds::lid_tap_scores(ctx);
    REQUIRE(scores.size() == 2);
    REQUIRE(scores[0] == Catch::Approx(asds::lid_score({1.0, 2.0, 4.0}).value));
    REQUIRE(scores[1] == Catch::Approx(asds::lid_score({1.0, 3.0, 9.0}).value));
    REQUIRE(asds::lid_context_score(ctx) == Catch::Approx(scores[0] + scores[1]));
}

TEST_CASE("degenerate taps are capped, keeping sums finite", "[baselines]") {
    NeighborContext ctx;
    TapNeighbors flat;
    flat.indices = {0, 1};
    flat.distances = {3.0, 3.0};
    flat.labels = {0, 0};
    ctx.taps = {flat};
    const auto scores = asds::lid_tap_scores(ctx);
    REQUIRE(scores[0] == asds::kLidCap);
    REQUIRE(std::isfinite(asds::lid_context_score(ctx)));
}

TEST_CASE("lid feature matrix lays contexts out row-wise", "[baselines]") {
    const std::vector<NeighborContext> ctxs = {two_tap_context(), two_tap_context()};
    const Tensor<double> f = asds::lid_feature_matrix(ctxs);
    REQUIRE(f.shape() == std::vector<std::size_t>{2, 2});
    const auto expect = asds::lid_tap_scores(ctxs[0]);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t t = 0; t < 2; ++t) REQUIRE(f(i, t) == expect[t]);
}

TEST_CASE("cholesky factor reconstructs the matrix", "[baselines]") {
    asds::Rng rng(11);
    const std::size_t d = 6;
    // SPD by construction: B Bt + I.
    Tensor<double> b({d, d});
    for (auto& v : b.vec()) v = rng.normal();
    Tensor<double> a({d, d});
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = i == j ? 1.0 : 0.0;
            for (std::size_t k = 0; k < d; ++k) s += b(i, k) * b(j, k);
            a(i, j) = s;
        }

    Tensor<double> l = a;
    asds::detail::cholesky(l);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < d; ++k) s += l(i, k) * l(j, k);
            REQUIRE(s == Catch::Approx(a(i, j)).margin(1e-9));
            if (j > i) REQUIRE(l(i, j) == 0.0); // strictly lower triangular
        }
}

TEST_CASE("cholesky rejects a non positive definite matrix", "[baselines]") {
    Tensor<double> bad({2, 2}, {1.0, 0.0, 0.0, -1.0});
    REQUIRE_THROWS_AS(asds::detail::cholesky(bad), asds::TrainingError);
}

TEST_CASE("mahalanobis distance matches the explicit 2x2 inverse", "[baselines]") {
    // Sigma = [[4, 1], [1, 2]], mu = (1, -1).
    Tensor<double> sigma({2, 2}, {4.0, 1.0, 1.0, 2.0});
    Tensor<double> l = sigma;
    asds::detail::cholesky(l);
    const double mu[2] = {1.0, -1.0};
    const double det = 4.0 * 2.0 - 1.0 * 1.0;
    asds::Rng rng(13);
    std::vector<double> scratch;
    for (int trial = 0; trial < 10; ++trial) {
        const double x[2] = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
        const double dx = x[0] - mu[0], dy = x[1] - mu[1];
        // (dx, dy) Sigma^-1 (dx, dy)^T with the adjugate inverse.
        const double expect = (2.0 * dx * dx - 2.0 * 1.0 * dx * dy + 4.0 * dy * dy) / det;
        const double got = asds::detail::mahalanobis_sq(l, mu, x, 2, scratch);
        REQUIRE(got == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("mda fit recovers per-class means and the pooled covariance", "[baselines]") {
    // Two classes, hand-computable: class 0 = {(0,0), (2,0)},
    // class 1 = {(0,4), (0,6)}. Means (1,0) and (0,5); every deviation
    // is (+-1, 0) or (0, +-1), so the pooled covariance with 1/(n - C)
    // normalization is diag(2/2, 2/2) = I.
    std::vector<Tensor<float>> feats = {
        Tensor<float>({4, 2}, {0, 0, 2, 0, 0, 4, 0, 6})};
    const std::vector<int> labels = {0, 0, 1, 1};
    const MdaModel m = asds::mda_fit(feats, labels, 2, {0}, /*lambda=*/0.5);

    REQUIRE(m.means[0](0, 0) == Catch::Approx(1.0));
    REQUIRE(m.means[0](0, 1) == Catch::Approx(0.0));
    REQUIRE(m.means[0](1, 0) == Catch::Approx(0.0));
    REQUIRE(m.means[0](1, 1) == Catch::Approx(5.0));
    REQUIRE(m.lambdas[0] == 0.5);

    // Sigma + lambda I = 1.5 I, so the factor is sqrt(1.5) I and the
    // distance from class 0's mean is |x - mu|^2 / 1.5.
    std::vector<double> scratch;
    const float q[2] = {4.0f, 0.0f};
    const double got =
        asds::detail::mahalanobis_sq(m.chol[0], m.means[0].row(0), q, 2, scratch);
    REQUIRE(got == Catch::Approx(9.0 / 1.5).margin(1e-12));

    // tap_scores takes the minimum over classes: q sits 9/1.5 from class
    // 0 and (16+25)/1.5 from class 1.
    const auto taps = m.tap_scores<float>({q});
    REQUIRE(taps[0] == Catch::Approx(9.0 / 1.5).margin(1e-12));
}

TEST_CASE("mda default lambda is 1e-3 of the mean variance", "[baselines]") {
    std::vector<Tensor<float>> feats = {
        Tensor<float>({4, 2}, {0, 0, 2, 0, 0, 4, 0, 6})};
    const MdaModel m = asds::mda_fit(feats, {0, 0, 1, 1}, 2, {0});
    // Pooled covariance is I (see above), so trace/d = 1.
    REQUIRE(m.lambdas[0] == Catch::Approx(1e-3).epsilon(1e-9));
}

TEST_CASE("mda scores rank near samples below far ones", "[baselines]") {
    asds::Rng rng(17);
    const std::size_t n = 200, d = 5;
    std::vector<Tensor<float>> feats = {Tensor<float>({n, d})};
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = int(i % 3);
        for (std::size_t j = 0; j < d; ++j)
            feats[0](i, j) = float(3.0 * labels[i] + 0.5 * rng.normal());
    }
    const MdaModel m = asds::mda_fit(feats, labels, 3, {2});

    // In-distribution rows score low; a far outlier scores high.
    std::vector<Tensor<float>> probe = {Tensor<float>({2, d})};
    for (std::size_t j = 0; j < d; ++j) {
        probe[0](0, j) = feats[0](0, j); // a training row
        probe[0](1, j) = 50.0f;          // far outside every class
    }
    const auto scores = asds::mda_scores(m, probe);
    REQUIRE(scores[0] < scores[1]);
    REQUIRE(scores[1] > 100.0);

    // Batch scoring agrees with the per-query path.
    const auto per_tap = asds::mda_tap_scores(m, probe);
    REQUIRE(per_tap.shape() == std::vector<std::size_t>{2, 1});
    REQUIRE(scores[0] == Catch::Approx(per_tap(0, 0)));
}

TEST_CASE("mda fit validates labels and class sizes", "[baselines]") {
    std::vector<Tensor<float>> feats = {Tensor<float>({4, 2})};
    REQUIRE_THROWS_AS(asds::mda_fit(feats, {0, 0, 1, 5}, 2, {0}), asds::ArgumentError);
    REQUIRE_THROWS_AS(asds::mda_fit(feats, {0, 0, 0, 1}, 2, {0}), asds::ArgumentError);
    REQUIRE_THROWS_AS(asds::mda_fit(feats, {0, 0, 1, 1}, 1, {0}), asds::ArgumentError);
}

TEST_CASE("mda model round-trips through the archive", "[baselines]") {
    asds::Rng rng(19);
    const std::size_t n = 40;
    std::vector<Tensor<float>> feats = {Tensor<float>({n, 3}), Tensor<float>({n, 4})};
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = int(i % 2);
        for (auto& f : feats)
            for (std::size_t j = 0; j < f.cols(); ++j)
                f(i, j) = float(2.0 * labels[i] + rng.normal());
    }
    const MdaModel m = asds::mda_fit(feats, labels, 2, {1, 3});

    const std::string path = "test_mda_tmp.bin";
    asds::save_mda(path, m);
    const MdaModel r = asds::load_mda(path);
    REQUIRE(r.taps == m.taps);
    REQUIRE(r.classes == m.classes);
    REQUIRE(r.lambdas == m.lambdas);
    for (std::size_t t = 0; t < m.taps.size(); ++t) {
        REQUIRE(r.means[t] == m.means[t]);
        REQUIRE(r.chol[t] == m.chol[t]);
    }
    REQUIRE(asds::mda_scores(r, feats) == asds::mda_scores(m, feats));
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
}

TEST_CASE("logistic combiner separates a linearly separable feature", "[baselines]") {
    asds::Rng rng(23);
    const std::size_t n = 300;
    Tensor<double> feats({n, 2});
    std::vector<char> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = char(i % 2);
        feats(i, 0) = (labels[i] ? 3.0 : 0.0) + rng.normal();
        feats(i, 1) = rng.normal(); // pure noise column
    }
    asds::LogisticCombiner comb;
    comb.fit(feats, labels);

    const auto scores = comb.score_rows(feats);
    std::vector<double> neg, pos;
    for (std::size_t i = 0; i < n; ++i) (labels[i] ? pos : neg).push_back(scores[i]);
    REQUIRE(asds::auroc(neg, pos) > 0.95);

    // The informative column dominates the noise column.
    REQUIRE(std::abs(comb.weights()[0]) > 3.0 * std::abs(comb.weights()[1]));
    for (double s : scores) {
        REQUIRE(s > 0.0);
        REQUIRE(s < 1.0);
    }
}

TEST_CASE("combiner z-scoring makes training scale invariant", "[baselines]") {
    asds::Rng rng(29);
    const std::size_t n = 100;
    Tensor<double> feats({n, 2});
    std::vector<char> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = char(i < n / 2);
        feats(i, 0) = (labels[i] ? 1.0 : -1.0) + rng.normal();
        feats(i, 1) = rng.normal();
    }
    Tensor<double> scaled = feats;
    for (std::size_t i = 0; i < n; ++i) {
        scaled(i, 0) = 1000.0 * feats(i, 0) + 77.0;
        scaled(i, 1) = 0.001 * feats(i, 1) - 5.0;
    }

    asds::LogisticCombiner a, b;
    a.fit(feats, labels);
    b.fit(scaled, labels);
    const auto sa = a.score_rows(feats);
    const auto sb = b.score_rows(scaled);
    for (std::size_t i = 0; i < n; ++i)
        REQUIRE(sa[i] == Catch::Approx(sb[i]).margin(1e-9));
}

TEST_CASE("combiner tolerates a constant feature column", "[baselines]") {
    Tensor<double> feats({6, 2});
    std::vector<char> labels = {0, 1, 0, 1, 0, 1};
    for (std::size_t i = 0; i < 6; ++i) {
        feats(i, 0) = labels[i] ? 1.0 : -1.0;
        feats(i, 1) = 42.0; // constant: carries no information
    }
    asds::LogisticCombiner comb;
    comb.fit(feats, labels);
    for (double s : comb.score_rows(feats)) REQUIRE(std::isfinite(s));
    REQUIRE(comb.weights()[1] == 0.0);
}

TEST_CASE("combiner training is deterministic", "[baselines]") {
    asds::Rng rng(31);
    Tensor<double> feats({50, 3});
    std::vector<char> labels(50);
    for (std::size_t i = 0; i < 50; ++i) {
        labels[i] = char(rng.below(2));
        for (std::size_t j = 0; j < 3; ++j) feats(i, j) = rng.normal() + labels[i];
    }
    asds::LogisticCombiner a, b;
    a.fit(feats, labels);
    b.fit(feats, labels);
    REQUIRE(a.weights() == b.weights());
    REQUIRE(a.bias() == b.bias());
}

TEST_CASE("combiner validates its arguments", "[baselines]") {
    Tensor<double> feats({4, 2});
    asds::LogisticCombiner comb;
    REQUIRE_THROWS_AS(comb.fit(feats, {0, 1, 0}), asds::ArgumentError);
    REQUIRE_THROWS_AS(comb.fit(feats, {0, 1, 0, 1}, 0), asds::ArgumentError);
    comb.fit(feats, {0, 1, 0, 1});
    const double row[3] = {0, 0, 0};
    REQUIRE_THROWS_AS(comb.score(row, 3), asds::ArgumentError);
}
