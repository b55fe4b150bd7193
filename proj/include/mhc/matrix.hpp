#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "mhc/errors.hpp"

namespace mhc {

// Non-owning row-major view. `ld` is the distance between consecutive rows,
// so a column slice of a wider matrix is expressible without copying.
template <typename T>
class BasicMatrixView {
public:
    BasicMatrixView() = default;
    BasicMatrixView(T* data, std::size_t rows, std::size_t cols, std::size_t ld)
        : data_(data), rows_(rows), cols_(cols), ld_(ld) {}
    BasicMatrixView(T* data, std::size_t rows, std::size_t cols)
        : BasicMatrixView(data, rows, cols, cols) {}

    // Allow view<double> -> view<const double>.
    template <typename U>
        requires std::is_convertible_v<U*, T*>
    BasicMatrixView(const BasicMatrixView<U>& other)  // NOLINT(google-explicit-constructor)
        : data_(other.data()), rows_(other.rows()), cols_(other.cols()), ld_(other.ld()) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t ld() const noexcept { return ld_; }
    T* data() const noexcept { return data_; }

    T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * ld_ + c]; }
    T* row(std::size_t r) const noexcept { return data_ + r * ld_; }

    BasicMatrixView col_slice(std::size_t first, std::size_t count) const {
        if (first + count > cols_) throw ValidationError("column slice out of range");
        return BasicMatrixView(data_ + first, rows_, count, ld_);
    }

    BasicMatrixView row_slice(std::size_t first, std::size_t count) const {
        if (first + count > rows_) throw ValidationError("row slice out of range");
        return BasicMatrixView(data_ + first * ld_, count, cols_, ld_);
    }

private:
    T* data_ = nullptr;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t ld_ = 0;
};

using MatrixView = BasicMatrixView<double>;
using ConstMatrixView = BasicMatrixView<const double>;

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) throw ValidationError("matrix data length != rows*cols");
    }

    // Rejects empty shapes and non-finite entries.
    static Matrix checked(std::size_t rows, std::size_t cols, std::vector<double> data) {
        if (rows == 0 || cols == 0) throw ValidationError("matrix must be non-empty");
        Matrix m(rows, cols, std::move(data));
        m.require_finite("matrix");
        return m;
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(std::span<const double> diag) {
        Matrix m(diag.size(), diag.size());
        for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
        return m;
    }

    static Matrix from(ConstMatrixView v) {
        Matrix m(v.rows(), v.cols());
        for (std::size_t r = 0; r < v.rows(); ++r)
            for (std::size_t c = 0; c < v.cols(); ++c) m(r, c) = v(r, c);
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    MatrixView view() noexcept { return {data_.data(), rows_, cols_}; }
    ConstMatrixView view() const noexcept { return {data_.data(), rows_, cols_}; }
    operator MatrixView() noexcept { return view(); }             // NOLINT(google-explicit-constructor)
    operator ConstMatrixView() const noexcept { return view(); }  // NOLINT(google-explicit-constructor)

    void fill(double v) noexcept {
        for (double& x : data_) x = v;
    }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    bool all_finite() const noexcept {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    void require_finite(const std::string& what) const {
        if (!all_finite()) throw ValidationError(what + " contains non-finite entries");
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Column-wise concatenation [blocks[0], blocks[1], ...]; all blocks share a row count.
Matrix hconcat(std::span<const Matrix> blocks);

Matrix scaled(ConstMatrixView m, double factor);

}  // namespace mhc
