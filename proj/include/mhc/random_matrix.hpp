#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mhc/linalg.hpp"
#include "mhc/matrix.hpp"

namespace mhc {

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0);

// i.i.d. standard normal entries from a seeded mt19937_64.
Matrix sample_gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed);

// [A_1, ..., A_h] with each A_i an independent N x d Gaussian block.
Matrix sample_head_concat(std::size_t seq_len, std::size_t head_dim, std::size_t heads, std::uint64_t seed);

// (sqrt(D) + sqrt(N)) / (sqrt(D) - sqrt(N)); requires D > N >= 1.
double asymptotic_kappa(std::size_t seq_len, std::size_t embed_dim);

struct SweepSpec {
    std::size_t seq_len = 32;
    std::size_t head_dim = 16;
    std::vector<std::size_t> head_counts;
    std::size_t trials = 50;
    std::uint64_t seed = 1;
    double rank_tol = kDefaultRankTol;

    void validate() const;
};

struct KappaStats {
    std::size_t heads = 0;
    std::size_t embed_dim = 0;
    std::size_t trials = 0;
    // Moments over the finite trials; NaN when every trial was rank deficient.
    double mean_kappa = 0.0;
    double std_kappa = 0.0;
    double min_kappa = 0.0;
    double max_kappa = 0.0;
    // Edge-of-spectrum prediction for the rectangle; +inf for square blocks.
    double asymptotic_kappa = 0.0;
    std::size_t rank_deficient_count = 0;
};

std::uint64_t trial_seed(std::uint64_t root, std::size_t heads, std::size_t trial);

// Per-trial condition numbers in trial order. Trials run in parallel; the
// result does not depend on the thread count.
std::vector<Kappa> concat_kappa_trials(const SweepSpec& spec, std::size_t heads);

KappaStats summarize_kappas(std::size_t heads, std::size_t seq_len, std::size_t head_dim,
                            const std::vector<Kappa>& kappas);

std::vector<KappaStats> head_concat_sweep(const SweepSpec& spec);

// Fraction of sampled rows x cols Gaussian matrices with full numerical rank.
double full_rank_probability(std::size_t rows, std::size_t cols, std::size_t trials, std::uint64_t seed,
                             double rank_tol = kDefaultRankTol);

namespace reference {
// Serial counterpart of concat_kappa_trials.
std::vector<Kappa> concat_kappa_trials(const SweepSpec& spec, std::size_t heads);
}  // namespace reference

}  // namespace mhc
