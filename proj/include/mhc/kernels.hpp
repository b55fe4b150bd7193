#pragma once

#include "mhc/matrix.hpp"

// Dense products used by the forward/backward passes and the Monte Carlo lab.
// The top-level functions split rows across OpenMP threads once the product is
// large enough; `reference` holds plain serial triple loops that the tests and
// benchmarks compare against.
namespace mhc::kernels {

enum class Mode { overwrite, accumulate };

// c = a * b (or c += a * b).
void matmul(ConstMatrixView a, ConstMatrixView b, MatrixView c, Mode mode = Mode::overwrite);
// c = a^T * b.
void matmul_tn(ConstMatrixView a, ConstMatrixView b, MatrixView c, Mode mode = Mode::overwrite);
// c = a * b^T.
void matmul_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c, Mode mode = Mode::overwrite);

Matrix multiply(ConstMatrixView a, ConstMatrixView b);

namespace reference {

void matmul(ConstMatrixView a, ConstMatrixView b, MatrixView c, Mode mode = Mode::overwrite);
void matmul_tn(ConstMatrixView a, ConstMatrixView b, MatrixView c, Mode mode = Mode::overwrite);
void matmul_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c, Mode mode = Mode::overwrite);

}  // namespace reference

}  // namespace mhc::kernels
