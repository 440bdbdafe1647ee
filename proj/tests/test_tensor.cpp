#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "asds/common.hpp"
#include "asds/tensor.hpp"
#include "asds/threading.hpp"

using asds::Tensor;
using asds::TensorD;
using asds::TensorF;

TEST_CASE("construction, shape accessors, element access", "[tensor]") {
    TensorF t({2, 3});
    REQUIRE(t.rank() == 2);
    REQUIRE(t.rows() == 2);
    REQUIRE(t.cols() == 3);
    REQUIRE(t.numel() == 6);
    for (std::size_t i = 0; i < t.numel(); ++i) REQUIRE(t[i] == 0.0f);
    t(1, 2) = 5.0f;
    REQUIRE(t[5] == 5.0f);
    REQUIRE_THROWS_AS(TensorF({2, 3}, {1.0f}), asds::ArgumentError);
    REQUIRE_THROWS_AS(TensorF({0, 3}), asds::ArgumentError);
}

TEST_CASE("matmul matches a hand-computed product", "[tensor]") {
    TensorD a({2, 3}, {1, 2, 3, 4, 5, 6});
    TensorD b({3, 2}, {7, 8, 9, 10, 11, 12});
    TensorD c = asds::matmul(a, b);
    REQUIRE(c.shape() == std::vector<std::size_t>{2, 2});
    REQUIRE(c(0, 0) == 58.0);
    REQUIRE(c(0, 1) == 64.0);
    REQUIRE(c(1, 0) == 139.0);
    REQUIRE(c(1, 1) == 154.0);
    REQUIRE_THROWS_AS(asds::matmul(a, a), asds::ArgumentError);
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transposes", "[tensor]") {
    TensorD a({3, 4});
    TensorD b({5, 4});
    TensorD c({3, 6});
    for (std::size_t i = 0; i < a.numel(); ++i) a[i] = std::sin(0.3 * double(i) + 1);
    for (std::size_t i = 0; i < b.numel(); ++i) b[i] = std::cos(0.7 * double(i));
    for (std::size_t i = 0; i < c.numel(); ++i) c[i] = std::sin(0.11 * double(i) - 2);

    const TensorD nt = asds::matmul_nt(a, b);
    const TensorD nt_ref = asds::matmul(a, asds::transpose(b));
    REQUIRE(asds::max_abs_diff(nt, nt_ref) < 1e-12);

    const TensorD tn = asds::matmul_tn(a, c);
    const TensorD tn_ref = asds::matmul(asds::transpose(a), c);
    REQUIRE(asds::max_abs_diff(tn, tn_ref) < 1e-12);
}

TEST_CASE("elementwise ops and the bias broadcast", "[tensor]") {
    TensorD a({2, 2}, {1, 2, 3, 4});
    TensorD b({2, 2}, {10, 20, 30, 40});
    REQUIRE(asds::add(a, b) == TensorD({2, 2}, {11, 22, 33, 44}));
    REQUIRE(asds::sub(b, a) == TensorD({2, 2}, {9, 18, 27, 36}));
    REQUIRE(asds::mul(a, a) == TensorD({2, 2}, {1, 4, 9, 16}));
    REQUIRE(asds::scale(a, 2.0) == TensorD({2, 2}, {2, 4, 6, 8}));
    TensorD bias({2}, {100, 200});
    REQUIRE(asds::add_bias(a, bias) == TensorD({2, 2}, {101, 202, 103, 204}));
    TensorD wrong({3}, {1, 2, 3});
    REQUIRE_THROWS_AS(asds::add_bias(a, wrong), asds::ArgumentError);
    REQUIRE_THROWS_AS(asds::add(a, wrong), asds::ArgumentError);
}

TEST_CASE("softmax rows are positive, normalized, and shift-invariant", "[tensor]") {
    TensorD z({2, 3}, {1, 2, 3, -1, 0, 1});
    TensorD p = asds::softmax_rows(z);
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < p.cols(); ++j) {
            REQUIRE(p(i, j) > 0.0);
            s += p(i, j);
        }
        REQUIRE(s == Catch::Approx(1.0).epsilon(1e-12));
    }
    // Adding a constant per row leaves the softmax unchanged.
    TensorD z2 = z;
    for (std::size_t j = 0; j < 3; ++j) z2(0, j) += 500.0;
    TensorD p2 = asds::softmax_rows(z2);
    for (std::size_t j = 0; j < 3; ++j) REQUIRE(p2(0, j) == Catch::Approx(p(0, j)).epsilon(1e-12));
    // Large magnitudes must not overflow.
    TensorD big({1, 2}, {1000.0, 1001.0});
    TensorD pb = asds::softmax_rows(big);
    REQUIRE(pb.all_finite());
    REQUIRE(pb(0, 1) > pb(0, 0));
}

TEST_CASE("argmax, reductions, distances", "[tensor]") {
    TensorD a({2, 3}, {0, 5, 2, 9, 1, 9});
    REQUIRE(asds::argmax_row(a, 0) == 1);
    REQUIRE(asds::argmax_row(a, 1) == 0); // first max wins on ties
    REQUIRE(asds::sum(a) == 26.0);
    REQUIRE(asds::sumsq(a) == 192.0);

    const float x[3] = {0, 3, 0};
    const float y[3] = {4, 3, 3};
    REQUIRE(asds::euclidean(x, y, 3) == Catch::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("clip applies per-column bounds", "[tensor]") {
    TensorD a({2, 2}, {-5, 0.5, 2, 10});
    TensorD lo({2}, {0, 0});
    TensorD hi({2}, {1, 4});
    REQUIRE(asds::clip(a, lo, hi) == TensorD({2, 2}, {0, 0.5, 1, 4}));
}

TEST_CASE("parallel_for matches the sequential result for any worker count", "[tensor]") {
    std::vector<double> out(1000, 0.0);
    asds::parallel_for(out.size(), [&](std::size_t i) { out[i] = std::sqrt(double(i)); });
    for (std::size_t i = 0; i < out.size(); ++i) REQUIRE(out[i] == std::sqrt(double(i)));
}
