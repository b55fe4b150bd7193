#include <gtest/gtest.h>

#include <cmath>

#include "mhc/errors.hpp"
#include "mhc/linalg.hpp"
#include "mhc/random_matrix.hpp"

using namespace mhc;

TEST(SampleGaussian, Deterministic) {
    EXPECT_EQ(sample_gaussian(2, 2, 7), sample_gaussian(2, 2, 7));
    EXPECT_FALSE(sample_gaussian(2, 2, 7) == sample_gaussian(2, 2, 8));
}

TEST(SampleGaussian, SampleMeanNearZero) {
    const Matrix m = sample_gaussian(100, 100, 3);
    double sum = 0.0;
    for (double v : m.values()) sum += v;
    EXPECT_NEAR(sum / 10000.0, 0.0, 0.05);
}

TEST(SampleGaussian, WideDrawIsFullRank) {
    for (std::uint64_t seed : {0u, 17u, 123456u}) EXPECT_EQ(numerical_rank(sample_gaussian(32, 1024, seed)), 32u);
}

TEST(HeadConcat, BlocksAreIndependentDraws) {
    const Matrix a = sample_head_concat(4, 3, 2, 9);
    EXPECT_EQ(a.rows(), 4u);
    EXPECT_EQ(a.cols(), 6u);
    EXPECT_FALSE(a.view().col_slice(0, 3)(0, 0) == a.view().col_slice(3, 3)(0, 0));
}

TEST(AsymptoticKappa, ClosedFormValues) {
    EXPECT_NEAR(asymptotic_kappa(64, 4096), 9.0 / 7.0, 1e-15);
    EXPECT_DOUBLE_EQ(asymptotic_kappa(1, 4), 3.0);
    EXPECT_THROW(asymptotic_kappa(4, 4), DomainError);
    EXPECT_THROW(asymptotic_kappa(8, 2), DomainError);
    double prev = asymptotic_kappa(16, 17);
    for (std::size_t dm = 32; dm <= 1 << 16; dm *= 2) {
        const double k = asymptotic_kappa(16, dm);
        EXPECT_LT(k, prev);
        EXPECT_GT(k, 1.0);
        prev = k;
    }
}

TEST(Sweep, DecreasesTowardAsymptote) {
    SweepSpec spec;
    spec.seq_len = 32;
    spec.head_dim = 16;
    spec.head_counts = {4, 8, 16, 32, 64};
    spec.trials = 50;
    spec.seed = 1;
    const auto stats = head_concat_sweep(spec);
    ASSERT_EQ(stats.size(), 5u);
    for (std::size_t i = 1; i < stats.size(); ++i) EXPECT_LT(stats[i].mean_kappa, stats[i - 1].mean_kappa);
    EXPECT_NEAR(stats.back().mean_kappa / asymptotic_kappa(32, 1024), 1.0, 0.10);
    for (const auto& s : stats) EXPECT_EQ(s.rank_deficient_count, 0u);
}

TEST(Sweep, SingleHeadSingleTrialEqualsDirectKappa) {
    SweepSpec spec;
    spec.seq_len = 4;
    spec.head_dim = 4;
    spec.head_counts = {1};
    spec.trials = 1;
    spec.seed = 77;
    const auto stats = head_concat_sweep(spec);
    const Matrix block = sample_head_concat(4, 4, 1, trial_seed(77, 1, 0));
    EXPECT_EQ(stats[0].mean_kappa, condition_number(block).value());
    EXPECT_TRUE(std::isinf(stats[0].asymptotic_kappa));
}

TEST(Sweep, TallBlocksAreFullRank) {
    SweepSpec spec;
    spec.seq_len = 32;
    spec.head_dim = 8;
    spec.head_counts = {2};
    spec.trials = 50;
    const auto kappas = concat_kappa_trials(spec, 2);
    for (const Kappa& k : kappas) EXPECT_TRUE(k.is_finite());
    EXPECT_EQ(head_concat_sweep(spec)[0].rank_deficient_count, 0u);
}

TEST(Sweep, ParallelMatchesSerialBitForBit) {
    SweepSpec spec;
    spec.seq_len = 16;
    spec.head_dim = 8;
    spec.head_counts = {1, 3};
    spec.trials = 20;
    spec.seed = 5;
    for (std::size_t h : spec.head_counts) EXPECT_EQ(concat_kappa_trials(spec, h), reference::concat_kappa_trials(spec, h));
}

TEST(Sweep, ValidationRejectsEmptyHeads) {
    SweepSpec spec;
    EXPECT_THROW(spec.validate(), ValidationError);
    spec.head_counts = {0};
    EXPECT_THROW(spec.validate(), ValidationError);
}

TEST(Summary, AllFlaggedGivesNaNMoments) {
    const KappaStats s = summarize_kappas(2, 8, 4, {Kappa::infinite(), Kappa::infinite()});
    EXPECT_TRUE(std::isnan(s.mean_kappa));
    EXPECT_EQ(s.rank_deficient_count, 2u);
}

TEST(Summary, SampleStdUsesBesselCorrection) {
    const KappaStats s = summarize_kappas(1, 4, 8, {Kappa::finite(1.0), Kappa::finite(3.0), Kappa::infinite()});
    EXPECT_DOUBLE_EQ(s.mean_kappa, 2.0);
    EXPECT_DOUBLE_EQ(s.std_kappa, std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(s.min_kappa, 1.0);
    EXPECT_DOUBLE_EQ(s.max_kappa, 3.0);
    EXPECT_EQ(s.rank_deficient_count, 1u);
}

TEST(FullRankProbability, KnownCases) {
    EXPECT_EQ(full_rank_probability(1, 1, 10, 3), 1.0);
    EXPECT_EQ(full_rank_probability(8, 8, 500, 4), 1.0);
}
