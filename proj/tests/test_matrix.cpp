// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lens/matrix.hpp"
#include "lens/rng.hpp"
#include "support/reference.hpp"

using namespace lens;
using Catch::Matchers::WithinAbs;

namespace {

Matrix make(std::size_t r, std::size_t c, std::initializer_list<double> values) {
    Matrix m(r, c);
    std::copy(values.begin(), values.end(), m.data.begin());
    return m;
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.normal(0.0, scale);
    return m;
}

}  // namespace

TEST_CASE("matmul basics") {
    const Matrix a = make(2, 2, {1, 2, 3, 4});
    SECTION("identity is exact") {
        const Matrix p = matmul(a, Matrix::identity(2));
        CHECK(p.data == a.data);
    }
    SECTION("hand-multiplied 1x2 by 2x3") {
        const Matrix x = make(1, 2, {1, 1});
        const Matrix w = make(2, 3, {1, 0, -1, 0, 2, 1});
        const Matrix p = matmul(x, w);
        CHECK(p.rows == 1);
        CHECK(p.cols == 3);
        CHECK(p.data == std::vector<double>{1, 2, 0});
    }
    SECTION("zero matrix annihilates") {
        Rng rng(11);
        const Matrix r = random_matrix(3, 4, rng);
        const Matrix z(4, 2);
        const Matrix p = matmul(r, z);
        for (double v : p.data) CHECK(v == 0.0);
    }
    SECTION("shape mismatch throws") {
        CHECK_THROWS_AS(matmul(a, Matrix(3, 2)), Error);
        CHECK_THROWS_WITH(matmul(a, Matrix(3, 2)),
                          Catch::Matchers::ContainsSubstring("shape"));
    }
    SECTION("identity property on random matrices") {
        Rng rng(12);
        for (int t = 0; t < 20; ++t) {
            const std::size_t r = 1 + rng.uniform_below(6);
            const std::size_t c = 1 + rng.uniform_below(6);
            const Matrix m = random_matrix(r, c, rng);
            CHECK(matmul(m, Matrix::identity(c)).data == m.data);
        }
    }
}

TEST_CASE("masked softmax rows") {
    SECTION("uniform over all-allowed row") {
        const Matrix scores(3, 3);
        const AttentionMask all(3, true);
        const Matrix p = masked_softmax_rows(scores, all);
        for (std::size_t q = 0; q < 3; ++q)
            for (std::size_t k = 0; k < 3; ++k) CHECK(p(q, k) == 1.0 / 3.0);
    }
    SECTION("single survivor") {
        Matrix scores(3, 3, 1.0);
        AttentionMask m(3);
        for (std::size_t q = 0; q < 3; ++q) m.set(q, 0, true);
        const Matrix p = masked_softmax_rows(scores, m);
        for (std::size_t q = 0; q < 3; ++q) {
            CHECK(p(q, 0) == 1.0);
            CHECK(p(q, 1) == 0.0);
            CHECK(p(q, 2) == 0.0);
        }
    }
    SECTION("hand softmax over two allowed entries") {
        Matrix scores(3, 3);
        scores(0, 0) = std::log(2.0);
        AttentionMask m(3);
        m.set(0, 0, true);
        m.set(0, 1, true);
        m.set(1, 1, true);
        m.set(2, 2, true);
        const Matrix p = masked_softmax_rows(scores, m);
        CHECK_THAT(p(0, 0), WithinAbs(2.0 / 3.0, 1e-15));
        CHECK_THAT(p(0, 1), WithinAbs(1.0 / 3.0, 1e-15));
        CHECK(p(0, 2) == 0.0);
    }
    SECTION("degenerate row throws") {
        const Matrix scores(2, 2);
        AttentionMask m(2);
        m.set(0, 0, true);  // row 1 has no allowed entries
        CHECK_THROWS_WITH(masked_softmax_rows(scores, m),
                          Catch::Matchers::ContainsSubstring("no allowed"));
    }
    SECTION("rows sum to one, zeros at disallowed, finite everywhere") {
        Rng rng(21);
        for (int t = 0; t < 30; ++t) {
            const std::size_t n = 1 + rng.uniform_below(12);
            const Matrix scores = random_matrix(n, n, rng, 5.0);
            AttentionMask m(n);
            for (std::size_t q = 0; q < n; ++q) {
                m.set(q, q, true);
                for (std::size_t k = 0; k < q; ++k)
                    m.set(q, k, rng.uniform_below(2) == 0);
            }
            const Matrix p = masked_softmax_rows(scores, m);
            REQUIRE(all_finite(p));
            for (std::size_t q = 0; q < n; ++q) {
                double sum = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (!m.at(q, k)) CHECK(p(q, k) == 0.0);
                    sum += p(q, k);
                }
                CHECK_THAT(sum, WithinAbs(1.0, 1e-12));
            }
        }
    }
    SECTION("all-allowed causal mask matches the independent reference") {
        Rng rng(22);
        for (int t = 0; t < 20; ++t) {
            const std::size_t n = 1 + rng.uniform_below(10);
            const Matrix scores = random_matrix(n, n, rng, 3.0);
            AttentionMask causal(n);
            for (std::size_t q = 0; q < n; ++q)
                for (std::size_t k = 0; k <= q; ++k) causal.set(q, k, true);
            const Matrix p = masked_softmax_rows(scores, causal);
            const Matrix ref = lens_test::reference_causal_softmax(scores);
            for (std::size_t i = 0; i < p.data.size(); ++i)
                CHECK_THAT(p.data[i], WithinAbs(ref.data[i], 1e-12));
        }
    }
}

TEST_CASE("rms norm") {
    SECTION("zero rows stay zero") {
        const Matrix x(2, 3);
        const Matrix y = rms_norm(x, Vec(3, 1.0));
        for (double v : y.data) CHECK(v == 0.0);
    }
    SECTION("hand arithmetic for [3,4]") {
        const Matrix x = make(1, 2, {3, 4});
        const Matrix y = rms_norm(x, Vec(2, 1.0));
        const double scale = 1.0 / std::sqrt(12.5 + 1e-6);
        CHECK_THAT(y(0, 0), WithinAbs(3.0 * scale, 1e-12));
        CHECK_THAT(y(0, 1), WithinAbs(4.0 * scale, 1e-12));
    }
    SECTION("zero gain annihilates") {
        Rng rng(31);
        const Matrix x = random_matrix(4, 5, rng);
        const Matrix y = rms_norm(x, Vec(5, 0.0));
        for (double v : y.data) CHECK(v == 0.0);
    }
    SECTION("gain length mismatch throws") {
        CHECK_THROWS_AS(rms_norm(Matrix(1, 3), Vec(2, 1.0)), Error);
    }
}

TEST_CASE("activations") {
    SECTION("relu") {
        const Matrix x = make(1, 3, {-1, 0, 2});
        const Matrix y = activation(x, Activation::relu);
        CHECK(y.data == std::vector<double>{0, 0, 2});
    }
    SECTION("silu at zero and one") {
        const Matrix x = make(1, 2, {0, 1});
        const Matrix y = activation(x, Activation::silu);
        CHECK(y(0, 0) == 0.0);
        CHECK_THAT(y(0, 1), WithinAbs(1.0 / (1.0 + std::exp(-1.0)), 1e-15));
        CHECK_THAT(y(0, 1), WithinAbs(0.7310585786300049, 1e-12));
    }
    SECTION("finite on random input") {
        Rng rng(41);
        const Matrix x = random_matrix(6, 7, rng, 50.0);
        CHECK(all_finite(activation(x, Activation::relu)));
        CHECK(all_finite(activation(x, Activation::silu)));
    }
    SECTION("parse round trip") {
        CHECK(parse_activation("relu") == Activation::relu);
        CHECK(parse_activation("silu") == Activation::silu);
        CHECK_THROWS_AS(parse_activation("gelu"), Error);
    }
}

TEST_CASE("rng determinism and sampling") {
    SECTION("same seed, same stream") {
        Rng a(99), b(99);
        for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    }
    SECTION("substreams differ") {
        Rng a = Rng::substream(5, 0);
        Rng b = Rng::substream(5, 1);
        CHECK(a.next_u64() != b.next_u64());
    }
    SECTION("sample without replacement is sorted and distinct") {
        Rng rng(7);
        for (int t = 0; t < 50; ++t) {
            const std::size_t n = 1 + rng.uniform_below(20);
            const std::size_t m = 1 + rng.uniform_below(n);
            const auto s = rng.sample_without_replacement(n, m);
            REQUIRE(s.size() == m);
            for (std::size_t i = 0; i < s.size(); ++i) {
                CHECK(s[i] < n);
                if (i > 0) CHECK(s[i] > s[i - 1]);
            }
        }
    }
    SECTION("full sample is the identity permutation") {
        Rng a(1), b(2);
        const auto sa = a.sample_without_replacement(9, 9);
        const auto sb = b.sample_without_replacement(9, 9);
        CHECK(sa == sb);
        for (std::size_t i = 0; i < 9; ++i) CHECK(sa[i] == i);
    }
    SECTION("normal moments are sane") {
        Rng rng(13);
        double sum = 0.0, sq = 0.0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            const double v = rng.normal();
            sum += v;
            sq += v * v;
        }
        CHECK_THAT(sum / n, WithinAbs(0.0, 0.05));
        CHECK_THAT(sq / n, WithinAbs(1.0, 0.05));
    }
}
