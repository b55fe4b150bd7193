#include "mhc/matrix.hpp"

namespace mhc {

Matrix hconcat(std::span<const Matrix> blocks) {
    if (blocks.empty()) throw ValidationError("hconcat needs at least one block");
    const std::size_t rows = blocks.front().rows();
    std::size_t cols = 0;
    for (const Matrix& b : blocks) {
        if (b.rows() != rows) throw ValidationError("hconcat row mismatch");
        cols += b.cols();
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    for (const Matrix& b : blocks) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < b.cols(); ++c) out(r, offset + c) = b(r, c);
        offset += b.cols();
    }
    return out;
}

Matrix scaled(ConstMatrixView m, double factor) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c) * factor;
    return out;
}

}  // namespace mhc
