#include "mhc/random_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace mhc {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Kappa trial_kappa(const SweepSpec& spec, std::size_t heads, std::size_t trial) {
    const Matrix a = sample_head_concat(spec.seq_len, spec.head_dim, heads, trial_seed(spec.seed, heads, trial));
    return condition_number(a, spec.rank_tol);
}

double rectangle_kappa(std::size_t rows, std::size_t cols) {
    if (rows == cols) return std::numeric_limits<double>::infinity();
    return asymptotic_kappa(std::min(rows, cols), std::max(rows, cols));
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b) {
    return splitmix(splitmix(splitmix(root) ^ a) ^ b);
}

Matrix sample_gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    if (rows == 0 || cols == 0) throw ValidationError("sample_gaussian: rows and cols must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (double& x : m.values()) x = normal(rng);
    return m;
}

Matrix sample_head_concat(std::size_t seq_len, std::size_t head_dim, std::size_t heads, std::uint64_t seed) {
    if (heads == 0) throw ValidationError("sample_head_concat: heads must be >= 1");
    std::vector<Matrix> blocks;
    blocks.reserve(heads);
    for (std::size_t i = 0; i < heads; ++i) blocks.push_back(sample_gaussian(seq_len, head_dim, mix_seed(seed, i)));
    return hconcat(blocks);
}

double asymptotic_kappa(std::size_t seq_len, std::size_t embed_dim) {
    if (seq_len < 1 || embed_dim <= seq_len)
        throw DomainError("asymptotic_kappa: requires D > N >= 1 (got N=" + std::to_string(seq_len) +
                          ", D=" + std::to_string(embed_dim) + ")");
    const double rn = std::sqrt(static_cast<double>(seq_len));
    const double rd = std::sqrt(static_cast<double>(embed_dim));
    return (rd + rn) / (rd - rn);
}

void SweepSpec::validate() const {
    if (seq_len == 0) throw ValidationError("sweep: N must be >= 1");
    if (head_dim == 0) throw ValidationError("sweep: d must be >= 1");
    if (head_counts.empty()) throw ValidationError("sweep: head_counts must not be empty");
    if (trials == 0) throw ValidationError("sweep: trials must be >= 1");
    if (!(rank_tol > 0.0)) throw ValidationError("sweep: rank_tol must be positive");
    for (std::size_t i = 0; i < head_counts.size(); ++i) {
        if (head_counts[i] == 0) throw ValidationError("sweep: head counts must be >= 1");
        if (i > 0 && head_counts[i] <= head_counts[i - 1])
            throw ValidationError("sweep: head counts must be strictly ascending");
    }
}

std::uint64_t trial_seed(std::uint64_t root, std::size_t heads, std::size_t trial) {
    return mix_seed(root, heads, trial);
}

std::vector<Kappa> concat_kappa_trials(const SweepSpec& spec, std::size_t heads) {
    spec.validate();
    std::vector<Kappa> out(spec.trials);
    const auto n = static_cast<std::ptrdiff_t>(spec.trials);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < n; ++t) out[static_cast<std::size_t>(t)] = trial_kappa(spec, heads, t);
    return out;
}

KappaStats summarize_kappas(std::size_t heads, std::size_t seq_len, std::size_t head_dim,
                            const std::vector<Kappa>& kappas) {
    KappaStats s;
    s.heads = heads;
    s.embed_dim = heads * head_dim;
    s.trials = kappas.size();
    s.asymptotic_kappa = rectangle_kappa(seq_len, s.embed_dim);

    std::vector<double> finite;
    finite.reserve(kappas.size());
    for (const Kappa& k : kappas) {
        if (k.is_finite())
            finite.push_back(k.value());
        else
            ++s.rank_deficient_count;
    }
    if (finite.empty()) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        s.mean_kappa = s.std_kappa = s.min_kappa = s.max_kappa = nan;
        return s;
    }
    double sum = 0.0;
    for (double v : finite) sum += v;
    s.mean_kappa = sum / static_cast<double>(finite.size());
    double ss = 0.0;
    for (double v : finite) ss += (v - s.mean_kappa) * (v - s.mean_kappa);
    s.std_kappa = finite.size() > 1 ? std::sqrt(ss / static_cast<double>(finite.size() - 1)) : 0.0;
    const auto [lo, hi] = std::minmax_element(finite.begin(), finite.end());
    s.min_kappa = *lo;
    s.max_kappa = *hi;
    // Rounding in the mean must not push it outside [min, max].
    s.mean_kappa = std::clamp(s.mean_kappa, s.min_kappa, s.max_kappa);
    return s;
}

std::vector<KappaStats> head_concat_sweep(const SweepSpec& spec) {
    spec.validate();
    std::vector<KappaStats> out;
    out.reserve(spec.head_counts.size());
    for (std::size_t h : spec.head_counts)
        out.push_back(summarize_kappas(h, spec.seq_len, spec.head_dim, concat_kappa_trials(spec, h)));
    return out;
}

double full_rank_probability(std::size_t rows, std::size_t cols, std::size_t trials, std::uint64_t seed,
                             double rank_tol) {
    if (trials == 0) throw ValidationError("full_rank_probability: trials must be >= 1");
    if (rows == 0 || cols == 0) throw ValidationError("full_rank_probability: rows and cols must be >= 1");
    const std::size_t full = std::min(rows, cols);
    std::vector<unsigned char> ok(trials, 0);
    const auto n = static_cast<std::ptrdiff_t>(trials);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        const Matrix m = sample_gaussian(rows, cols, mix_seed(seed, static_cast<std::uint64_t>(t)));
        ok[static_cast<std::size_t>(t)] = numerical_rank(m, rank_tol) == full ? 1 : 0;
    }
    std::size_t count = 0;
    for (unsigned char v : ok) count += v;
    return static_cast<double>(count) / static_cast<double>(trials);
}

namespace reference {

std::vector<Kappa> concat_kappa_trials(const SweepSpec& spec, std::size_t heads) {
    spec.validate();
    std::vector<Kappa> out;
    out.reserve(spec.trials);
    for (std::size_t t = 0; t < spec.trials; ++t) out.push_back(trial_kappa(spec, heads, t));
    return out;
}

}  // namespace reference
}  // namespace mhc
