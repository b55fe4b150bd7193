#include "mhc/kernels.hpp"

#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mhc::kernels {
namespace {

// Below this many multiply-adds a fork costs more than it saves.
constexpr std::size_t kParallelWork = std::size_t{1} << 17;

void check(bool ok, const char* op) {
    if (!ok) throw ValidationError(std::string(op) + ": shape mismatch");
}

void prepare(MatrixView c, Mode mode) {
    if (mode == Mode::accumulate) return;
    for (std::size_t i = 0; i < c.rows(); ++i) {
        double* row = c.row(i);
        for (std::size_t j = 0; j < c.cols(); ++j) row[j] = 0.0;
    }
}

bool go_parallel(std::size_t work) {
#ifdef _OPENMP
    return work >= kParallelWork && !omp_in_parallel() && omp_get_max_threads() > 1;
#else
    (void)work;
    return false;
#endif
}

inline double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    for (; k < n; ++k) s0 += a[k] * b[k];
    return (s0 + s1) + (s2 + s3);
}

}  // namespace

void matmul(ConstMatrixView a, ConstMatrixView b, MatrixView c, Mode mode) {
    check(a.cols() == b.rows() && c.rows() == a.rows() && c.cols() == b.cols(), "matmul");
    prepare(c, mode);
    const std::size_t m = a.rows(), n = b.cols(), kk = a.cols();
    const bool par = go_parallel(m * n * kk);
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < m; ++i) {
        double* __restrict crow = c.row(i);
        const double* arow = a.row(i);
        for (std::size_t k = 0; k < kk; ++k) {
            const double aik = arow[k];
            const double* __restrict brow = b.row(k);
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

void matmul_tn(ConstMatrixView a, ConstMatrixView b, MatrixView c, Mode mode) {
    check(a.rows() == b.rows() && c.rows() == a.cols() && c.cols() == b.cols(), "matmul_tn");
    prepare(c, mode);
    const std::size_t m = a.cols(), n = b.cols(), kk = a.rows();
    const bool par = go_parallel(m * n * kk);
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < m; ++i) {
        double* __restrict crow = c.row(i);
        for (std::size_t k = 0; k < kk; ++k) {
            const double aki = a(k, i);
            const double* __restrict brow = b.row(k);
            for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
        }
    }
}

void matmul_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c, Mode mode) {
    check(a.cols() == b.cols() && c.rows() == a.rows() && c.cols() == b.rows(), "matmul_nt");
    prepare(c, mode);
    const std::size_t m = a.rows(), n = b.rows(), kk = a.cols();
    const bool par = go_parallel(m * n * kk);
#pragma omp parallel for schedule(static) if (par)
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c.row(i);
        const double* arow = a.row(i);
        for (std::size_t j = 0; j < n; ++j) crow[j] += dot(arow, b.row(j), kk);
    }
}

Matrix multiply(ConstMatrixView a, ConstMatrixView b) {
    Matrix c(a.rows(), b.cols());
    matmul(a, b, c);
    return c;
}

namespace reference {

void matmul(ConstMatrixView a, ConstMatrixView b, MatrixView c, Mode mode) {
    check(a.cols() == b.rows() && c.rows() == a.rows() && c.cols() == b.cols(), "matmul");
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = (mode == Mode::accumulate ? c(i, j) : 0.0) + s;
        }
}

void matmul_tn(ConstMatrixView a, ConstMatrixView b, MatrixView c, Mode mode) {
    check(a.rows() == b.rows() && c.rows() == a.cols() && c.cols() == b.cols(), "matmul_tn");
    for (std::size_t i = 0; i < a.cols(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.rows(); ++k) s += a(k, i) * b(k, j);
            c(i, j) = (mode == Mode::accumulate ? c(i, j) : 0.0) + s;
        }
}

void matmul_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c, Mode mode) {
    check(a.cols() == b.cols() && c.rows() == a.rows() && c.cols() == b.rows(), "matmul_nt");
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
            c(i, j) = (mode == Mode::accumulate ? c(i, j) : 0.0) + s;
        }
}

}  // namespace reference
}  // namespace mhc::kernels
