#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mhc/errors.hpp"
#include "mhc/kernels.hpp"
#include "mhc/linalg.hpp"
#include "mhc/random_matrix.hpp"

using namespace mhc;

namespace {

double max_abs_diff(ConstMatrixView a, ConstMatrixView b) {
    double m = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) m = std::max(m, std::abs(a(r, c) - b(r, c)));
    return m;
}

Matrix reconstruct(const SvdResult& s) {
    Matrix us = Matrix::from(s.left_vectors);
    for (std::size_t r = 0; r < us.rows(); ++r)
        for (std::size_t c = 0; c < us.cols(); ++c) us(r, c) *= s.singular_values[c];
    Matrix out(us.rows(), s.right_vectors.rows());
    kernels::matmul_nt(us, s.right_vectors, out);
    return out;
}

double orthonormality_error(ConstMatrixView q) {
    Matrix g(q.cols(), q.cols());
    kernels::reference::matmul_tn(q, q, g);
    double m = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) m = std::max(m, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
    return m;
}

}  // namespace

TEST(Matrix, CheckedRejectsWrongSize) {
    EXPECT_THROW(Matrix::checked(2, 2, {1.0, 2.0, 3.0}), ValidationError);
    EXPECT_NO_THROW(Matrix::checked(2, 2, {1.0, 2.0, 3.0, 4.0}));
}

TEST(Matrix, HconcatPlacesBlocksSideBySide) {
    std::vector<Matrix> blocks = {Matrix::checked(2, 1, {1, 2}), Matrix::checked(2, 2, {3, 4, 5, 6})};
    const Matrix m = hconcat(blocks);
    EXPECT_EQ(m, Matrix::checked(2, 3, {1, 3, 4, 2, 5, 6}));
    std::vector<Matrix> ragged = {Matrix(2, 1), Matrix(3, 1)};
    EXPECT_THROW(hconcat(ragged), ValidationError);
}

TEST(Kernels, ParallelMatchesReferenceOnLargeProducts) {
    const Matrix a = sample_gaussian(300, 200, 1), b = sample_gaussian(200, 150, 2);
    Matrix fast(300, 150), slow(300, 150);
    kernels::matmul(a, b, fast);
    kernels::reference::matmul(a, b, slow);
    EXPECT_LT(max_abs_diff(fast, slow), 1e-11);

    const Matrix at = a.transposed(), bt = b.transposed();
    Matrix tn(300, 150), nt(300, 150);
    kernels::matmul_tn(at, b, tn);
    kernels::matmul_nt(a, bt, nt);
    EXPECT_LT(max_abs_diff(tn, slow), 1e-11);
    EXPECT_LT(max_abs_diff(nt, slow), 1e-11);
}

TEST(Kernels, AccumulateAddsToExisting) {
    const Matrix a = Matrix::checked(1, 2, {1, 2}), b = Matrix::checked(2, 1, {3, 4});
    Matrix c(1, 1, 5.0);
    kernels::matmul(a, b, c, kernels::Mode::accumulate);
    EXPECT_EQ(c(0, 0), 16.0);
    kernels::matmul(a, b, c);
    EXPECT_EQ(c(0, 0), 11.0);
}

TEST(Kernels, ShapeMismatchThrows) {
    Matrix c(2, 2);
    EXPECT_THROW(kernels::matmul(Matrix(2, 3), Matrix(2, 2), c), ValidationError);
}

TEST(Kernels, NanPropagatesThroughZeros) {
    const Matrix a(1, 1, 0.0);
    const Matrix b(1, 1, std::numeric_limits<double>::quiet_NaN());
    Matrix c(1, 1);
    kernels::matmul(a, b, c);
    EXPECT_TRUE(std::isnan(c(0, 0)));
}

TEST(Svd, IdentityHasUnitSingularValues) {
    EXPECT_EQ(singular_values(Matrix::identity(3)), (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(Svd, DiagonalSortedDescending) {
    const std::vector<double> diag = {1.0, 3.0};
    const auto s = singular_values(Matrix::diagonal(diag));
    ASSERT_EQ(s.size(), 2u);
    EXPECT_DOUBLE_EQ(s[0], 3.0);
    EXPECT_DOUBLE_EQ(s[1], 1.0);
}

TEST(Svd, GaussianFourBySixReconstructs) {
    const Matrix m = sample_gaussian(4, 6, 42);
    const SvdResult s = svd(m);
    ASSERT_EQ(s.singular_values.size(), 4u);
    EXPECT_LE(max_abs_diff(reconstruct(s), m), 1e-10 * s.singular_values[0]);
    EXPECT_LT(orthonormality_error(s.left_vectors), 1e-12);
    EXPECT_LT(orthonormality_error(s.right_vectors), 1e-12);
}

TEST(Svd, RandomShapesProperty) {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> dim(1, 64);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t rows = dim(rng), cols = dim(rng) * (trial % 3 == 0 ? 4 : 1);
        const Matrix m = sample_gaussian(rows, cols, 1000 + trial);
        const SvdResult s = svd(m);
        ASSERT_EQ(s.singular_values.size(), std::min(rows, cols));
        EXPECT_TRUE(std::is_sorted(s.singular_values.rbegin(), s.singular_values.rend()));
        EXPECT_LE(max_abs_diff(reconstruct(s), m), 1e-10 * s.singular_values[0]) << rows << "x" << cols;
        EXPECT_LT(orthonormality_error(s.left_vectors), 1e-10);
        EXPECT_LT(orthonormality_error(s.right_vectors), 1e-10);
    }
}

TEST(Svd, LargestShapeProperty) {
    const Matrix m = sample_gaussian(64, 256, 5);
    const SvdResult s = svd(m);
    EXPECT_LE(max_abs_diff(reconstruct(s), m), 1e-10 * s.singular_values[0]);
    EXPECT_LT(orthonormality_error(s.left_vectors), 1e-10);
}

TEST(Svd, RankDeficientStillOrthonormal) {
    Matrix m(5, 3);
    for (std::size_t r = 0; r < 5; ++r) m(r, 0) = m(r, 1) = static_cast<double>(r + 1);
    const SvdResult s = svd(m);
    EXPECT_EQ(s.singular_values[2], 0.0);
    EXPECT_LT(orthonormality_error(s.left_vectors), 1e-12);
    EXPECT_LE(max_abs_diff(reconstruct(s), m), 1e-12 * s.singular_values[0]);
}

TEST(Svd, RejectsNonFiniteAndEmpty) {
    Matrix m(2, 2, 1.0);
    m(1, 1) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(svd(m), ValidationError);
    EXPECT_THROW(svd(Matrix()), ValidationError);
}

TEST(Svd, SweepLimitRaisesNumericalError) {
    SvdOptions opts;
    opts.max_sweeps = 1;
    try {
        svd(sample_gaussian(12, 12, 3), opts);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_EQ(e.iterations(), 1u);
    }
}

TEST(ConditionNumber, TrivialCases) {
    EXPECT_DOUBLE_EQ(condition_number(Matrix::identity(5)).value(), 1.0);
    const std::vector<double> diag = {4.0, 2.0};
    EXPECT_DOUBLE_EQ(condition_number(Matrix::diagonal(diag)).value(), 2.0);
    EXPECT_TRUE(condition_number(Matrix(3, 3)).is_infinite());
}

TEST(ConditionNumber, WideGaussianNearAsymptote) {
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) sum += condition_number(sample_gaussian(32, 1024, seed)).value();
    const double expected = (std::sqrt(1024.0) + std::sqrt(32.0)) / (std::sqrt(1024.0) - std::sqrt(32.0));
    EXPECT_NEAR(sum / 100.0, expected, 0.05);
}

TEST(ConditionNumber, ScaleAndTransposeInvariant) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> scale(-1e3, 1e3);
    for (int i = 0; i < 30; ++i) {
        const Matrix m = sample_gaussian(7 + i % 5, 9, 500 + i);
        double c = scale(rng);
        if (c == 0.0) c = 1.0;
        const double k = condition_number(m).value();
        EXPECT_NEAR(condition_number(scaled(m, c)).value() / k, 1.0, 1e-9);
        EXPECT_NEAR(condition_number(m.transposed()).value() / k, 1.0, 1e-9);
        EXPECT_GE(k, 1.0);
    }
}

TEST(ConditionNumber, FromSingularValuesFlagsSmallTail) {
    EXPECT_TRUE(condition_number_from_singular_values({1.0, 1e-14}, 2, 2).is_infinite());
    EXPECT_DOUBLE_EQ(condition_number_from_singular_values({2.0, 1.0}, 2, 2).value(), 2.0);
    EXPECT_TRUE(condition_number_from_singular_values({0.0}, 1, 1).is_infinite());
}

TEST(NumericalRank, TrivialAndRankOne) {
    EXPECT_EQ(numerical_rank(Matrix(3, 3)), 0u);
    EXPECT_EQ(numerical_rank(Matrix::identity(4)), 4u);
    const Matrix u = sample_gaussian(8, 1, 3), v = sample_gaussian(1, 8, 4);
    EXPECT_EQ(numerical_rank(kernels::multiply(u, v)), 1u);
    EXPECT_THROW(numerical_rank(Matrix::identity(2), 0.0), ValidationError);
}
