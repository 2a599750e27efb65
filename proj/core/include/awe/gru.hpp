#pragma once

#include "awe/ops.hpp"
#include "awe/rng.hpp"
#include "awe/tensor.hpp"

namespace awe::nn {

// Gated recurrent cell with gate blocks ordered [update z | reset r | candidate n]:
//
//   z  = sigmoid(x Wz + h Uz + bz)
//   r  = sigmoid(x Wr + h Ur + br)
//   n  = tanh(x Wn + (r * h) Un + bn)
//   h' = (1 - z) * h + z * n
struct GruCellParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor w_input;   // input_dim x 3H
  Tensor w_hidden;  // H x 3H
  Tensor bias;      // 1 x 3H

  static GruCellParams zeros(std::size_t input_dim, std::size_t hidden_dim);
  static GruCellParams random(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  // Throws DimensionError if the tensors disagree with the declared dims.
  void validate() const;
};

// Untraced single-step evaluation; input has input_dim entries, h_prev hidden_dim.
Tensor gru_cell_forward(const GruCellParams& params, const Tensor& input, const Tensor& h_prev);

struct GruVars {
  Var w_input;
  Var w_hidden;
  Var bias;
};

// One batched step given the precomputed input projection x W + b (B x 3H).
Var gru_step(const GruVars& p, Var input_proj, Var h_prev);
// One batched step from raw inputs x (B x input_dim).
Var gru_cell(const GruVars& p, Var x, Var h_prev);

}  // namespace awe::nn
