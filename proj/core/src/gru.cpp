#include "awe/gru.hpp"

#include <cmath>
#include <memory>

#include "awe/error.hpp"
#include "awe/params.hpp"

namespace awe::nn {

GruCellParams GruCellParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  return {input_dim, hidden_dim, Tensor(input_dim, 3 * hidden_dim), Tensor(hidden_dim, 3 * hidden_dim),
          Tensor(1, 3 * hidden_dim)};
}

GruCellParams GruCellParams::random(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  GruCellParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.w_input = uniform_init(input_dim, 3 * hidden_dim, input_dim, rng);
  p.w_hidden = uniform_init(hidden_dim, 3 * hidden_dim, hidden_dim, rng);
  p.bias = uniform_init(1, 3 * hidden_dim, hidden_dim, rng);
  return p;
}

void GruCellParams::validate() const {
  const std::size_t g = 3 * hidden_dim;
  if (w_input.rows() != input_dim || w_input.cols() != g || w_hidden.rows() != hidden_dim ||
      w_hidden.cols() != g || bias.size() != g) {
    throw DimensionError("GRU parameters inconsistent with dims in=" + std::to_string(input_dim) +
                         " hidden=" + std::to_string(hidden_dim));
  }
}

namespace {

double sigmoid_scalar(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Saved activations of one fused step, shared with the backward closure.
struct StepCache {
  Tensor z;
  Tensor r;
  Tensor n;
  Tensor rh;  // r * h_prev
};

}  // namespace

Var gru_step(const GruVars& p, Var input_proj, Var h_prev) {
  const Tensor& xp = input_proj.value();
  const Tensor& h = h_prev.value();
  const Tensor& u = p.w_hidden.value();
  const std::size_t hd = h.cols();
  const std::size_t nb = h.rows();
  const std::size_t g3 = 3 * hd;
  if (xp.cols() != g3 || xp.rows() != nb) {
    throw DimensionError("gru_step: input projection " + xp.shape_string() + " incompatible with hidden state " +
                         h.shape_string());
  }
  if (u.rows() != hd || u.cols() != g3) {
    throw DimensionError("gru_step: recurrent weights " + u.shape_string() + " for hidden size " +
                         std::to_string(hd));
  }
  Tape& tape = *h_prev.tape();
  if (input_proj.tape() != &tape || p.w_hidden.tape() != &tape) {
    throw NumericError("detached graph: operands live on different tapes");
  }

  auto cache = std::make_shared<StepCache>();
  cache->z = Tensor(nb, hd);
  cache->r = Tensor(nb, hd);
  cache->n = Tensor(nb, hd);
  cache->rh = Tensor(nb, hd);
  Tensor hu(nb, 2 * hd);
  gemm_acc(nb, hd, 2 * hd, h.data(), hd, u.data(), g3, hu.data(), 2 * hd);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t j = 0; j < hd; ++j) {
      const double z = sigmoid_scalar(xp(b, j) + hu(b, j));
      const double r = sigmoid_scalar(xp(b, hd + j) + hu(b, hd + j));
      cache->z(b, j) = z;
      cache->r(b, j) = r;
      cache->rh(b, j) = r * h(b, j);
    }
  }
  Tensor cn(nb, hd);
  gemm_acc(nb, hd, hd, cache->rh.data(), hd, u.data() + 2 * hd, g3, cn.data(), hd);
  Tensor out(nb, hd);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t j = 0; j < hd; ++j) {
      const double n = std::tanh(xp(b, 2 * hd + j) + cn(b, j));
      const double z = cache->z(b, j);
      cache->n(b, j) = n;
      out(b, j) = (1.0 - z) * h(b, j) + z * n;
    }
  }
  if (!tape.grad_enabled()) cache.reset();

  const std::size_t ix = input_proj.id(), ih = h_prev.id(), iu = p.w_hidden.id();
  return tape.record(
      std::move(out), {input_proj, h_prev, p.w_hidden},
      [cache, ix, ih, iu, hd, nb](Tape& t, const Tensor& g) {
        const std::size_t g3 = 3 * hd;
        const Tensor& h = t.value(ih);
        const Tensor& u = t.value(iu);
        // Pre-activation gradients in gate order [z | r | n].
        Tensor da(nb, g3);
        Tensor dh(nb, hd);
        for (std::size_t b = 0; b < nb; ++b) {
          for (std::size_t j = 0; j < hd; ++j) {
            const double z = cache->z(b, j);
            const double n = cache->n(b, j);
            const double gb = g(b, j);
            da(b, j) = gb * (n - h(b, j)) * z * (1.0 - z);
            da(b, 2 * hd + j) = gb * z * (1.0 - n * n);
            dh(b, j) = gb * (1.0 - z);
          }
        }
        // d(r * h) = da_n * U_n^T
        Tensor drh(nb, hd);
        const Tensor un_t = [&] {
          Tensor tr(hd, hd);
          for (std::size_t i = 0; i < hd; ++i) {
            for (std::size_t j = 0; j < hd; ++j) tr(j, i) = u(i, 2 * hd + j);
          }
          return tr;
        }();
        gemm_acc(nb, hd, hd, da.data() + 2 * hd, g3, un_t.data(), hd, drh.data(), hd);
        for (std::size_t b = 0; b < nb; ++b) {
          for (std::size_t j = 0; j < hd; ++j) {
            const double r = cache->r(b, j);
            da(b, hd + j) = drh(b, j) * h(b, j) * r * (1.0 - r);
            dh(b, j) += drh(b, j) * r;
          }
        }
        if (t.needs_grad(ih)) {
          // dh += da_zr * U_zr^T
          Tensor uzr_t(2 * hd, hd);
          for (std::size_t i = 0; i < hd; ++i) {
            for (std::size_t j = 0; j < 2 * hd; ++j) uzr_t(j, i) = u(i, j);
          }
          gemm_acc(nb, 2 * hd, hd, da.data(), g3, uzr_t.data(), hd, dh.data(), hd);
          Tensor& gh = t.grad(ih);
          for (std::size_t i = 0; i < dh.size(); ++i) gh[i] += dh[i];
        }
        if (t.needs_grad(iu)) {
          Tensor& gu = t.grad(iu);
          gemm_tn_acc(nb, hd, 2 * hd, h.data(), hd, da.data(), g3, gu.data(), g3);
          gemm_tn_acc(nb, hd, hd, cache->rh.data(), hd, da.data() + 2 * hd, g3, gu.data() + 2 * hd, g3);
        }
        if (t.needs_grad(ix)) {
          Tensor& gx = t.grad(ix);
          for (std::size_t i = 0; i < da.size(); ++i) gx[i] += da[i];
        }
      },
      "gru_step");
}

Var gru_cell(const GruVars& p, Var x, Var h_prev) {
  return gru_step(p, add_bias(matmul(x, p.w_input), p.bias), h_prev);
}

Tensor gru_cell_forward(const GruCellParams& params, const Tensor& input, const Tensor& h_prev) {
  params.validate();
  if (input.size() != params.input_dim || h_prev.size() != params.hidden_dim) {
    throw DimensionError("gru_cell_forward: input " + input.shape_string() + " / state " +
                         h_prev.shape_string() + " do not match cell " +
                         std::to_string(params.input_dim) + "->" + std::to_string(params.hidden_dim));
  }
  Tape tape(false);
  GruVars vars{tape.constant(params.w_input), tape.constant(params.w_hidden),
               tape.constant(params.bias)};
  Tensor xin(1, params.input_dim);
  std::copy(input.values().begin(), input.values().end(), xin.data());
  Tensor hin(1, params.hidden_dim);
  std::copy(h_prev.values().begin(), h_prev.values().end(), hin.data());
  Var out = gru_cell(vars, tape.constant(std::move(xin)), tape.constant(std::move(hin)));
  std::vector<double> v(out.value().values().begin(), out.value().values().end());
  return Tensor::vector(std::move(v));
}

}  // namespace awe::nn
