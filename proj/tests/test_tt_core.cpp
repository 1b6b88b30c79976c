#include "qttsp/qtt_build.hpp"
#include "qttsp/tt_core.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace qttsp;
using namespace qttsp::testing;

namespace {

Vec linspace_ints(int L)
{
    Vec v(1 << L);
    for (int i = 0; i < v.size(); ++i) v(i) = i;
    return v;
}

} // namespace

TEST(TtCore, RejectsBadShapes)
{
    EXPECT_THROW(TtCore(0, 2, 1, 1), std::invalid_argument);
    EXPECT_THROW(TtCore(1, 2, 1, 1, {1.0}), std::invalid_argument);
    EXPECT_THROW(TtCore(1, 1, 1, 1, {std::nan("")}), std::invalid_argument);
    EXPECT_THROW(TtVector({TtCore(1, 2, 1, 2)}), std::invalid_argument);
    EXPECT_THROW(TtMatrix({TtCore(1, 2, 1, 1)}), std::invalid_argument);
}

TEST(TtCore, UnfoldingsShareLayout)
{
    std::mt19937_64 rng(1);
    TtCore c = random_core(rng, 3, 2, 2, 4);
    for (int a = 0; a < 3; ++a)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int b = 0; b < 4; ++b) {
                    EXPECT_EQ(c.left()(a + 3 * (i + 2 * j), b), c(a, i, j, b));
                    EXPECT_EQ(c.right()(a, i + 2 * (j + 2 * b)), c(a, i, j, b));
                }
}

TEST(Quantize, OnesHaveRankOne)
{
    for (int L : {1, 4, 9}) {
        auto x = quantize(Vec::Ones(1 << L), 0.0);
        for (int r : x.bonds()) EXPECT_EQ(r, 1);
    }
}

TEST(Quantize, IndexRampHasRankTwo)
{
    auto x = quantize(linspace_ints(10), 1e-13);
    for (int r : x.bonds()) EXPECT_EQ(r, 2);
}

TEST(Quantize, SampledExponentialIsRankOne)
{
    GridSpec g{10, GridKind::interior_dirichlet};
    Vec v(g.size());
    for (std::uint64_t i = 0; i < g.size(); ++i) v(i) = std::exp(-3 * g.node(i));
    auto x = quantize(v, 1e-13);
    for (int r : x.bonds()) EXPECT_EQ(r, 1);
}

TEST(Quantize, RejectsNonPowerOfTwo)
{
    EXPECT_THROW(quantize(Vec::Ones(12), 0.0), std::invalid_argument);
    EXPECT_THROW(quantize(Vec::Ones(12), -1.0), std::invalid_argument);
}

TEST(Quantize, RoundTrip)
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> N;
    for (int L : {1, 3, 6, 11}) {
        Vec v(1 << L);
        for (auto& t : v) t = N(rng);
        EXPECT_LT(rel_err(dequantize(quantize(v, 0.0)), v), 1e-12) << L;
    }
}

TEST(Quantize, ToleranceContract)
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> N;
    Vec v(1 << 10);
    for (int i = 0; i < v.size(); ++i) v(i) = std::sin(0.01 * i * i) + 1e-3 * N(rng);
    for (double eps : {1e-1, 1e-3, 1e-6}) {
        auto x = quantize(v, eps);
        EXPECT_LE(rel_err(dequantize(x), v), eps);
    }
}

TEST(Dequantize, OnesChain)
{
    Vec d = dequantize(qtt_ones(3));
    EXPECT_EQ(d.size(), 8);
    for (double t : d) EXPECT_EQ(t, 1.0);
}

TEST(Dequantize, CapIsEnforced)
{
    setenv("QTT_DENSE_CAP", "5", 1);
    EXPECT_THROW(dequantize(qtt_ones(6)), std::length_error);
    EXPECT_NO_THROW(dequantize(qtt_ones(5)));
    unsetenv("QTT_DENSE_CAP");
    EXPECT_NO_THROW(dequantize(qtt_ones(6)));
}

TEST(Round, PaddedOnesCollapse)
{
    auto two = axpy(0.0, qtt_ones(6), qtt_ones(6));
    EXPECT_EQ(two.max_rank(), 2);
    auto r = tt_round(two, 1e-14);
    for (int b : r.bonds()) EXPECT_EQ(b, 1);
    EXPECT_LT(rel_err(dequantize(r), Vec::Ones(64)), 1e-14);
}

TEST(Round, ZeroToleranceIsExact)
{
    std::mt19937_64 rng(3);
    auto x = random_vector(rng, 10, 5);
    auto r = tt_round(x, 0.0);
    EXPECT_LE(norm(axpy(-1.0, r, x)), 1e-12 * norm(x));
    auto xb = x.bonds(), rb = r.bonds();
    for (std::size_t k = 0; k < xb.size(); ++k) EXPECT_LE(rb[k], xb[k]);
}

TEST(Round, DistinctExponentialsKeepRankTwo)
{
    GridSpec g{10, GridKind::interior_dirichlet};
    auto s = axpy(1.0, qtt_exponential(1.0, g), qtt_exponential(4.0, g));
    auto r = tt_round(s, 1e-13);
    for (int b : r.bonds()) EXPECT_EQ(b, 2);
}

TEST(Round, SiteOrthogonalExceptFirst)
{
    std::mt19937_64 rng(4);
    auto r = tt_round(random_vector(rng, 8, 4), 1e-8);
    for (int k = 1; k < r.level(); ++k) {
        Mat R = r.core(k).right();
        EXPECT_LT((R * R.transpose() - Mat::Identity(R.rows(), R.rows())).norm(), 1e-12);
    }
}

TEST(Axpy, Examples)
{
    auto x = qtt_ones(5);
    auto s = axpy(1.0, x, x);
    for (int b : s.bonds()) EXPECT_EQ(b, 2);
    EXPECT_LT(rel_err(dequantize(s), Vec::Constant(32, 2.0)), 1e-15);
    for (int b : tt_round(s, 1e-14).bonds()) EXPECT_EQ(b, 1);

    std::mt19937_64 rng(5);
    auto y = random_vector(rng, 5, 3);
    EXPECT_LT(rel_err(dequantize(axpy(0.0, x, y)), dequantize(y)), 1e-15);
    EXPECT_LT(norm(tt_round(axpy(-1.0, y, y), 1e-13)), 1e-13 * norm(y));
    EXPECT_THROW(axpy(1.0, qtt_ones(4), qtt_ones(5)), std::invalid_argument);
}

TEST(Dot, Examples)
{
    EXPECT_DOUBLE_EQ(dot(qtt_ones(5), qtt_ones(5)), 32.0);
    EXPECT_EQ(dot(qtt_ones(5), qtt_zeros(5)), 0.0);
    std::mt19937_64 rng(6);
    auto x = random_vector(rng, 8, 3), y = random_vector(rng, 8, 3);
    const double dense = dequantize(x).dot(dequantize(y));
    EXPECT_NEAR(dot(x, y), dense, 1e-12 * std::abs(dense));
    EXPECT_NEAR(norm(x), dequantize(x).norm(), 1e-12 * dequantize(x).norm());
    EXPECT_THROW(dot(qtt_ones(4), qtt_ones(5)), std::invalid_argument);
}

TEST(Matvec, Examples)
{
    std::mt19937_64 rng(9);
    auto x = random_vector(rng, 6, 2);
    EXPECT_LT(rel_err(dequantize(matvec(qtt_identity(6), x, 0.0)), dequantize(x)), 1e-15);

    auto A = random_matrix(rng, 6, 2);
    EXPECT_LT(rel_err(dequantize(matvec(A, x, 0.0)), to_dense(A) * dequantize(x)), 1e-12);

    auto A3 = random_matrix(rng, 6, 3);
    for (int b : apply(A3, x).bonds()) EXPECT_EQ(b, 6);
    EXPECT_THROW(matvec(qtt_identity(5), x, 0.0), std::invalid_argument);
}

TEST(Matmat, Examples)
{
    std::mt19937_64 rng(10);
    auto A = random_matrix(rng, 5, 3), B = random_matrix(rng, 5, 2);
    auto x = random_vector(rng, 5, 2);
    EXPECT_LT(rel_err(to_dense(matmat(A, qtt_identity(5), 0.0)), to_dense(A)), 1e-14);
    EXPECT_LT(rel_err(to_dense(transpose(transpose(A))), to_dense(A)), 0.0 + 1e-300);
    auto lhs = dequantize(matvec(matmat(A, B, 0.0), x, 0.0));
    auto rhs = dequantize(matvec(A, matvec(B, x, 0.0), 0.0));
    EXPECT_LT(rel_err(lhs, rhs), 1e-11);
    for (int b : matmat(A, B, 0.0).bonds()) EXPECT_EQ(b, 6);
    EXPECT_LT(rel_err(to_dense(transpose(A)), to_dense(A).transpose()), 1e-15);
}

TEST(QuantizeMatrix, RoundTripAndLaplacianRank)
{
    const int n = 32;
    Mat T = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        T(i, i) = 2;
        if (i > 0) T(i, i - 1) = -1;
        if (i + 1 < n) T(i, i + 1) = -1;
    }
    auto q = quantize_matrix(T, 1e-13);
    EXPECT_LE(q.max_rank(), 3);
    EXPECT_LT(rel_err(to_dense(q), T), 1e-13);
}

TEST(CoreProducts, StrongKroneckerOfRankOneIsKronecker)
{
    Mat a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 0, 5, 6, 7;
    TtCore k = strong_kronecker(TtCore::from_block(a), TtCore::from_block(b));
    Mat expect(4, 4);
    for (int i1 = 0; i1 < 2; ++i1)
        for (int j1 = 0; j1 < 2; ++j1)
            for (int i2 = 0; i2 < 2; ++i2)
                for (int j2 = 0; j2 < 2; ++j2) expect(2 * i1 + i2, 2 * j1 + j2) = a(i1, j1) * b(i2, j2);
    EXPECT_EQ((k.block(0, 0) - expect).norm(), 0.0);
    TtCore id = TtCore::from_block(Mat::Identity(2, 2));
    EXPECT_EQ((strong_kronecker(id, id).block(0, 0) - Mat::Identity(4, 4)).norm(), 0.0);
    EXPECT_THROW(strong_kronecker(TtCore(1, 2, 2, 2), TtCore(3, 2, 2, 1)), std::invalid_argument);
}

TEST(CoreProducts, ModeCoreProductOfRankOneIsMatrixProduct)
{
    Mat a(2, 3), b(3, 2);
    a << 1, 2, 3, 4, 5, 6;
    b << 1, 0, 2, 1, 0, 3;
    TtCore c = mode_core_product(TtCore::from_block(a), TtCore::from_block(b));
    EXPECT_EQ((c.block(0, 0) - a * b).norm(), 0.0);
    std::mt19937_64 rng(2);
    TtCore A = random_core(rng, 2, 2, 2, 2), B = random_core(rng, 2, 2, 2, 2);
    TtCore AB = mode_core_product(A, B);
    EXPECT_EQ(AB.rank_left(), 4);
    EXPECT_EQ(AB.rank_right(), 4);
    EXPECT_THROW(mode_core_product(TtCore(1, 2, 3, 1), TtCore(1, 2, 2, 1)), std::invalid_argument);
}

TEST(Algebra, DenseLawsOnSmallLevels)
{
    std::mt19937_64 rng(11);
    for (int L = 2; L <= 8; L += 3) {
        auto A = random_matrix(rng, L, 2);
        auto x = random_vector(rng, L, 3), y = random_vector(rng, L, 2);
        EXPECT_NEAR(dot(x, y), dot(y, x), 1e-12 * std::abs(dot(x, y)) + 1e-300);
        const double lhs = dot(matvec(A, x, 0.0), y), rhs = dot(x, matvec(transpose(A), y, 0.0));
        EXPECT_NEAR(lhs, rhs, 1e-11 * std::abs(lhs));
        auto lin = dequantize(matvec(A, axpy(2.0, x, y), 0.0));
        Vec expect = 2.0 * dequantize(matvec(A, x, 0.0)) + dequantize(matvec(A, y, 0.0));
        EXPECT_LT(rel_err(lin, expect), 1e-12);
    }
}

TEST(Entry, MatchesDense)
{
    std::mt19937_64 rng(12);
    auto x = random_vector(rng, 7, 3);
    Vec d = dequantize(x);
    for (std::uint64_t i : {0u, 5u, 77u, 127u}) EXPECT_NEAR(entry(x, i), d(i), 1e-13 * d.norm());
    auto A = random_matrix(rng, 4, 2);
    Mat D = to_dense(A);
    EXPECT_NEAR(entry(A, 3, 9), D(3, 9), 1e-13 * D.norm());
}
