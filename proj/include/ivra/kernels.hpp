#pragma once

#include <cstddef>

#include "ivra/matrix.hpp"

namespace ivra {

// Tuning knobs for the blocked kernel. `block` is the packed column-panel
// width; `threads` > 1 splits output rows into disjoint contiguous ranges,
// which keeps results bitwise identical to a serial run.
struct ExecPolicy {
  std::size_t block = 64;
  std::size_t threads = 1;
};

// Reference product: plain i-k-j loops, k strictly ascending per output
// element. All other matmul paths must reproduce this bit pattern.
Matrix2D matmul(const Matrix2D& a, const Matrix2D& b);

// Cache-blocked product: packs b into column panels of width `block` and
// runs register-tiled micro-kernels over them. Blocking reorders only the
// i/j traversal; for any given output element the k accumulation runs 0..K
// ascending into a single accumulator, so the result is bitwise equal to
// matmul() for every block size and thread count.
Matrix2D matmul_blocked(const Matrix2D& a, const Matrix2D& b,
                        const ExecPolicy& policy = {});

// Process-wide policy used by code that does not take an explicit one (the
// transformer pipeline's internal products). Defaults to block 64, one
// thread; the parallel variant produces bitwise-identical results, so
// changing it never alters outputs, only timing.
ExecPolicy default_exec_policy();
void set_default_exec_policy(const ExecPolicy& policy);

Matrix2D transpose(const Matrix2D& m);

// Row-wise layer normalisation: for each row, subtract the mean, divide by
// sqrt(variance + epsilon), then apply gamma/beta. Mean and variance are
// accumulated in double.
Matrix2D layer_norm_rows(const Matrix2D& m, const LayerNormParams& params);

// Row-wise softmax stabilised by subtracting the row maximum.
Matrix2D softmax_rows(const Matrix2D& m);

}  // namespace ivra
