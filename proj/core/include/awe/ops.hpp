#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "awe/tape.hpp"

namespace awe::nn {

// Differentiable tensor ops. Every op checks shapes (DimensionError), rejects
// non-finite outputs (NumericError) and records itself on the operands' tape.

Var matmul(Var a, Var b);
// a * b^T
Var matmul_nt(Var a, Var b);
// a * b[:, col_begin:col_end]
Var matmul_block(Var a, Var b, std::size_t col_begin, std::size_t col_end);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// Adds a 1 x n bias row to every row of a.
Var add_bias(Var a, Var bias);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
// 1 - a
Var one_minus(Var a);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);

// Row-wise select: row r of the result is a[r] when keep[r] != 0, else b[r].
Var blend(std::span<const std::uint8_t> keep, Var a, Var b);

Var concat_cols(Var a, Var b);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var gather_rows(Var a, std::span<const std::size_t> rows);

// Divides every row by sqrt(|row|^2 + eps).
Var row_normalize(Var a, double eps = 1e-12);
Var log_softmax_rows(Var a);

struct Entry {
  std::size_t row;
  std::size_t col;
};
// Column vector of a[row, col] for each entry.
Var pick(Var a, std::span<const Entry> entries);
// Sum of all entries, as a 1 x 1 tensor.
Var sum(Var a);
Var mean(Var a);
// sum_r weight[r] * |a[r] - target[r]|^2; rows with weight 0 are masked out.
Var weighted_sq_error(Var a, const Tensor& target, std::span<const double> row_weights);
// sum_i weights[i] * a[i] for a flattened a.
Var weighted_sum(Var a, std::span<const double> weights);

}  // namespace awe::nn
