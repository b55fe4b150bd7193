#include "mhc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mhc {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void validate(ConstMatrixView m) {
    if (m.rows() == 0 || m.cols() == 0) throw ValidationError("svd: matrix must be non-empty");
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            if (!std::isfinite(m(r, c))) throw ValidationError("svd: non-finite entry");
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
    return s;
}

void rotate(double* x, double* y, std::size_t n, double c, double s) {
    for (std::size_t k = 0; k < n; ++k) {
        const double xi = x[k];
        const double yi = y[k];
        x[k] = c * xi - s * yi;
        y[k] = s * xi + c * yi;
    }
}

// Orthogonalizes the rows of `work` (each row is a column of the tall input)
// in place; applies the same rotations to the rows of `right` when non-empty.
void jacobi_sweeps(Matrix& work, Matrix* right, const SvdOptions& options) {
    const std::size_t n = work.rows();
    const std::size_t len = work.cols();
    const double tol = std::max(options.orthogonality_tol, kEps * static_cast<double>(len));

    for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double* wi = work.data() + i * len;
            for (std::size_t j = i + 1; j < n; ++j) {
                double* wj = work.data() + j * len;
                const double alpha = dot(wi, wi, len);
                const double beta = dot(wj, wj, len);
                const double gamma = dot(wi, wj, len);
                if (alpha == 0.0 || beta == 0.0) continue;
                if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta)) continue;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::hypot(1.0, t);
                const double s = c * t;
                rotate(wi, wj, len, c, s);
                if (right) rotate(right->data() + i * n, right->data() + j * n, n, c, s);
                rotated = true;
            }
        }
        if (!rotated) return;
    }
    throw NumericalError("svd: one-sided Jacobi did not converge after " + std::to_string(options.max_sweeps) +
                             " sweeps",
                         options.max_sweeps);
}

// Gram-Schmidt completion of column `col` of `u` against columns [0, col) with
// known directions. Used for exactly-zero singular values.
void complete_column(Matrix& u, std::size_t col, const std::vector<bool>& known) {
    const std::size_t m = u.rows();
    for (std::size_t e = 0; e < m; ++e) {
        std::vector<double> v(m, 0.0);
        v[e] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t c = 0; c < u.cols(); ++c) {
                if (!known[c]) continue;
                double proj = 0.0;
                for (std::size_t r = 0; r < m; ++r) proj += u(r, c) * v[r];
                for (std::size_t r = 0; r < m; ++r) v[r] -= proj * u(r, c);
            }
        }
        const double norm = std::sqrt(dot(v.data(), v.data(), m));
        if (norm > 0.5) {
            for (std::size_t r = 0; r < m; ++r) u(r, col) = v[r] / norm;
            return;
        }
    }
}

// Thin SVD of a tall-or-square matrix given as its transpose (rows of `work`
// are the input's columns).
SvdResult tall_svd(Matrix work, bool want_right, const SvdOptions& options) {
    const std::size_t n = work.rows();
    const std::size_t m = work.cols();
    Matrix right = want_right ? Matrix::identity(n) : Matrix();
    jacobi_sweeps(work, want_right ? &right : nullptr, options);

    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) norms[i] = std::sqrt(dot(work.data() + i * m, work.data() + i * m, m));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

    SvdResult out;
    out.singular_values.resize(n);
    out.left_vectors = Matrix(m, n);
    if (want_right) out.right_vectors = Matrix(n, n);

    std::vector<bool> known(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        const double sigma = norms[src];
        out.singular_values[k] = sigma;
        if (sigma > 0.0) {
            for (std::size_t r = 0; r < m; ++r) out.left_vectors(r, k) = work(src, r) / sigma;
            known[k] = true;
        }
        if (want_right)
            for (std::size_t r = 0; r < n; ++r) out.right_vectors(r, k) = right(src, r);
    }
    for (std::size_t k = 0; k < n; ++k)
        if (!known[k]) {
            complete_column(out.left_vectors, k, known);
            known[k] = true;
        }
    return out;
}

SvdResult svd_impl(ConstMatrixView m, bool want_vectors, const SvdOptions& options) {
    validate(m);
    if (m.rows() >= m.cols()) {
        // Columns of m become rows of the work matrix.
        Matrix work(m.cols(), m.rows());
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c) work(c, r) = m(r, c);
        return tall_svd(std::move(work), want_vectors, options);
    }
    // Wide: decompose m^T = U' S V'^T, so m = V' S U'^T.
    SvdResult t = tall_svd(Matrix::from(m), want_vectors, options);
    SvdResult out;
    out.singular_values = std::move(t.singular_values);
    out.left_vectors = std::move(t.right_vectors);
    out.right_vectors = std::move(t.left_vectors);
    return out;
}

}  // namespace

SvdResult svd(ConstMatrixView m, const SvdOptions& options) { return svd_impl(m, true, options); }

std::vector<double> singular_values(ConstMatrixView m, const SvdOptions& options) {
    return svd_impl(m, false, options).singular_values;
}

Kappa condition_number_from_singular_values(const std::vector<double>& s, std::size_t rows, std::size_t cols,
                                            double rank_tol) {
    if (s.empty()) throw ValidationError("condition_number: no singular values");
    const double largest = s.front();
    const double smallest = s.back();
    const double threshold = rank_tol * largest * static_cast<double>(std::max(rows, cols));
    if (!(smallest > threshold) || largest == 0.0) return Kappa::infinite();
    return Kappa::finite(std::max(1.0, largest / smallest));
}

Kappa condition_number(ConstMatrixView m, double rank_tol) {
    return condition_number_from_singular_values(singular_values(m), m.rows(), m.cols(), rank_tol);
}

std::size_t numerical_rank(ConstMatrixView m, double rank_tol) {
    if (!(rank_tol > 0.0)) throw ValidationError("numerical_rank: rank_tol must be positive");
    const std::vector<double> s = singular_values(m);
    const double threshold = rank_tol * s.front() * static_cast<double>(std::max(m.rows(), m.cols()));
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](double x) { return x > threshold; }));
}

}  // namespace mhc
