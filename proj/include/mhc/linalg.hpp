#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "mhc/matrix.hpp"

namespace mhc {

inline constexpr double kDefaultRankTol = 1e-12;

// Thin SVD: m = U * diag(S) * V^T with U (rows x k), V (cols x k), k = min(rows, cols).
struct SvdResult {
    std::vector<double> singular_values;  // non-increasing, >= 0
    Matrix left_vectors;
    Matrix right_vectors;
};

struct SvdOptions {
    std::size_t max_sweeps = 80;
    // Pairs whose normalized inner product is below this count as orthogonal.
    double orthogonality_tol = 1e-15;
};

// One-sided (Hestenes) Jacobi. Throws ValidationError on empty or non-finite
// input and NumericalError when max_sweeps is exhausted.
SvdResult svd(ConstMatrixView m, const SvdOptions& options = {});

// Singular values only; skips accumulating the right rotations.
std::vector<double> singular_values(ConstMatrixView m, const SvdOptions& options = {});

// Condition number that is either a finite value >= 1 or flagged infinite
// (numerically rank deficient). Infinity is a flag, never a huge float.
class Kappa {
public:
    constexpr Kappa() = default;
    static constexpr Kappa finite(double v) { return Kappa(v, false); }
    static constexpr Kappa infinite() { return Kappa(std::numeric_limits<double>::infinity(), true); }

    constexpr bool is_finite() const noexcept { return !infinite_; }
    constexpr bool is_infinite() const noexcept { return infinite_; }
    // +inf when flagged.
    constexpr double value() const noexcept { return value_; }

    friend constexpr bool operator==(const Kappa&, const Kappa&) = default;

private:
    constexpr Kappa(double v, bool inf) : value_(v), infinite_(inf) {}
    double value_ = 1.0;
    bool infinite_ = false;
};

// sigma_1 / sigma_k with k = min(rows, cols) when sigma_k > rank_tol * sigma_1 * max(rows, cols);
// otherwise the infinite flag. The zero matrix is flagged, never thrown.
Kappa condition_number(ConstMatrixView m, double rank_tol = kDefaultRankTol);
Kappa condition_number_from_singular_values(const std::vector<double>& s, std::size_t rows, std::size_t cols,
                                            double rank_tol = kDefaultRankTol);

// Number of singular values above rank_tol * sigma_1 * max(rows, cols).
std::size_t numerical_rank(ConstMatrixView m, double rank_tol = kDefaultRankTol);

}  // namespace mhc
