#include "awe/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "awe/error.hpp"

namespace awe::nn {

namespace {

Tape& tape_of(const Var& a) {
  if (a.tape() == nullptr) throw NumericError("op on an unbound Var");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw NumericError("detached graph: operands live on different tapes");
  return tape_of(a);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

Tensor like(const Tensor& t) { return Tensor(t.rows(), t.cols()); }

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  Tensor out;
  gemm(a.value(), b.value(), out);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {a, b},
                     [ia, ib](Tape& t, const Tensor& g) {
                       if (t.needs_grad(ia)) gemm_nt(g, t.value(ib), t.grad(ia), true);
                       if (t.needs_grad(ib)) gemm_tn(t.value(ia), g, t.grad(ib), true);
                     },
                     "matmul");
}

Var matmul_nt(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  Tensor out;
  gemm_nt(a.value(), b.value(), out);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {a, b},
                     [ia, ib](Tape& t, const Tensor& g) {
                       if (t.needs_grad(ia)) gemm(g, t.value(ib), t.grad(ia), true);
                       if (t.needs_grad(ib)) gemm_tn(g, t.value(ia), t.grad(ib), true);
                     },
                     "matmul_nt");
}

namespace {

Tensor column_block(const Tensor& b, std::size_t c0, std::size_t c1) {
  Tensor blk(b.rows(), c1 - c0);
  for (std::size_t r = 0; r < b.rows(); ++r) {
    std::copy_n(b.data() + r * b.cols() + c0, c1 - c0, blk.data() + r * (c1 - c0));
  }
  return blk;
}

}  // namespace

Var matmul_block(Var a, Var b, std::size_t col_begin, std::size_t col_end) {
  Tape& tape = tape_of(a, b);
  const Tensor& bv = b.value();
  if (col_begin >= col_end || col_end > bv.cols()) {
    throw DimensionError("matmul_block: column range out of bounds for " + bv.shape_string());
  }
  Tensor out;
  gemm(a.value(), column_block(bv, col_begin, col_end), out);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(
      std::move(out), {a, b},
      [ia, ib, col_begin, col_end](Tape& t, const Tensor& g) {
        const Tensor& bfull = t.value(ib);
        if (t.needs_grad(ia)) gemm_nt(g, column_block(bfull, col_begin, col_end), t.grad(ia), true);
        if (t.needs_grad(ib)) {
          Tensor gb;
          gemm_tn(t.value(ia), g, gb);
          Tensor& dst = t.grad(ib);
          const std::size_t w = col_end - col_begin;
          for (std::size_t r = 0; r < gb.rows(); ++r) {
            double* d = dst.data() + r * dst.cols() + col_begin;
            const double* s = gb.data() + r * w;
            for (std::size_t j = 0; j < w; ++j) d[j] += s[j];
          }
        }
      },
      "matmul_block");
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {a, b},
                     [ia, ib](Tape& t, const Tensor& g) {
                       for (std::size_t id : {ia, ib}) {
                         if (!t.needs_grad(id)) continue;
                         Tensor& d = t.grad(id);
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                       }
                     },
                     "add");
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {a, b},
                     [ia, ib](Tape& t, const Tensor& g) {
                       if (t.needs_grad(ia)) {
                         Tensor& d = t.grad(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                       }
                       if (t.needs_grad(ib)) {
                         Tensor& d = t.grad(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
                       }
                     },
                     "sub");
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {a, b},
                     [ia, ib](Tape& t, const Tensor& g) {
                       if (t.needs_grad(ia)) {
                         Tensor& d = t.grad(ia);
                         const Tensor& o = t.value(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * o[i];
                       }
                       if (t.needs_grad(ib)) {
                         Tensor& d = t.grad(ib);
                         const Tensor& o = t.value(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * o[i];
                       }
                     },
                     "mul");
}

Var add_bias(Var a, Var bias) {
  Tape& tape = tape_of(a, bias);
  const Tensor& bv = bias.value();
  Tensor out = a.value();
  if (bv.size() != out.cols()) {
    throw DimensionError("add_bias: bias " + bv.shape_string() + " vs input " + out.shape_string());
  }
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* o = out.data() + r * out.cols();
    for (std::size_t j = 0; j < out.cols(); ++j) o[j] += bv[j];
  }
  const std::size_t ia = a.id(), ib = bias.id();
  return tape.record(std::move(out), {a, bias},
                     [ia, ib](Tape& t, const Tensor& g) {
                       if (t.needs_grad(ia)) {
                         Tensor& d = t.grad(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                       }
                       if (t.needs_grad(ib)) {
                         Tensor& d = t.grad(ib);
                         const std::size_t n = g.cols();
                         for (std::size_t r = 0; r < g.rows(); ++r) {
                           for (std::size_t j = 0; j < n; ++j) d[j] += g(r, j);
                         }
                       }
                     },
                     "add_bias");
}

Var scale(Var a, double s) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {a},
                     [ia, s](Tape& t, const Tensor& g) {
                       Tensor& d = t.grad(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) d[i] += s * g[i];
                     },
                     "scale");
}

Var add_scalar(Var a, double s) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s;
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {a},
                     [ia](Tape& t, const Tensor& g) {
                       Tensor& d = t.grad(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                     },
                     "add_scalar");
}

Var one_minus(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - out[i];
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {a},
                     [ia](Tape& t, const Tensor& g) {
                       Tensor& d = t.grad(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
                     },
                     "one_minus");
}

Var sigmoid(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  const std::size_t ia = a.id();
  const std::size_t io = tape.size();
  return tape.record(std::move(out), {a},
                     [ia, io](Tape& t, const Tensor& g) {
                       Tensor& d = t.grad(ia);
                       const Tensor& y = t.value(io);
                       for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
                     },
                     "sigmoid");
}

Var tanh(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  const std::size_t ia = a.id();
  const std::size_t io = tape.size();
  return tape.record(std::move(out), {a},
                     [ia, io](Tape& t, const Tensor& g) {
                       Tensor& d = t.grad(ia);
                       const Tensor& y = t.value(io);
                       for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
                     },
                     "tanh");
}

Var relu(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {a},
                     [ia](Tape& t, const Tensor& g) {
                       Tensor& d = t.grad(ia);
                       const Tensor& x = t.value(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         if (x[i] > 0.0) d[i] += g[i];
                       }
                     },
                     "relu");
}

Var blend(std::span<const std::uint8_t> keep, Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "blend");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (keep.size() != av.rows()) throw DimensionError("blend: mask length differs from row count");
  Tensor out = like(av);
  const std::size_t n = av.cols();
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const double* src = keep[r] ? av.data() + r * n : bv.data() + r * n;
    std::copy_n(src, n, out.data() + r * n);
  }
  std::vector<std::uint8_t> mask(keep.begin(), keep.end());
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {a, b},
                     [ia, ib, mask = std::move(mask), n](Tape& t, const Tensor& g) {
                       const bool ga = t.needs_grad(ia), gb = t.needs_grad(ib);
                       for (std::size_t r = 0; r < mask.size(); ++r) {
                         const std::size_t id = mask[r] ? ia : ib;
                         if (!(mask[r] ? ga : gb)) continue;
                         double* d = t.grad(id).data() + r * n;
                         const double* s = g.data() + r * n;
                         for (std::size_t j = 0; j < n; ++j) d[j] += s[j];
                       }
                     },
                     "blend");
}

Var concat_cols(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) throw DimensionError("concat_cols: row counts differ");
  const std::size_t na = av.cols(), nb = bv.cols();
  Tensor out(av.rows(), na + nb);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.data() + r * na, na, out.data() + r * (na + nb));
    std::copy_n(bv.data() + r * nb, nb, out.data() + r * (na + nb) + na);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(std::move(out), {a, b},
                     [ia, ib, na, nb](Tape& t, const Tensor& g) {
                       const std::size_t w = na + nb;
                       if (t.needs_grad(ia)) {
                         Tensor& d = t.grad(ia);
                         for (std::size_t r = 0; r < g.rows(); ++r) {
                           for (std::size_t j = 0; j < na; ++j) d[r * na + j] += g[r * w + j];
                         }
                       }
                       if (t.needs_grad(ib)) {
                         Tensor& d = t.grad(ib);
                         for (std::size_t r = 0; r < g.rows(); ++r) {
                           for (std::size_t j = 0; j < nb; ++j) d[r * nb + j] += g[r * w + na + j];
                         }
                       }
                     },
                     "concat_cols");
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Tape& tape = tape_of(parts.front());
  const std::size_t n = parts.front().value().cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    tape_of(parts.front(), p);
    if (p.value().cols() != n) throw DimensionError("concat_rows: column counts differ");
    total += p.value().rows();
  }
  Tensor out(total, n);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy_n(v.data(), v.size(), out.data() + off * n);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += v.rows();
  }
  auto fn = [ids, offsets, n](Tape& t, const Tensor& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.needs_grad(ids[k])) continue;
      Tensor& d = t.grad(ids[k]);
      const double* s = g.data() + offsets[k] * n;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
    }
  };
  return tape.record(std::move(out), parts, std::move(fn), "concat_rows");
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  if (begin >= end || end > av.rows()) throw DimensionError("slice_rows: range out of bounds");
  const std::size_t n = av.cols();
  Tensor out(end - begin, n);
  std::copy_n(av.data() + begin * n, out.size(), out.data());
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {a},
                     [ia, begin, n](Tape& t, const Tensor& g) {
                       double* d = t.grad(ia).data() + begin * n;
                       for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                     },
                     "slice_rows");
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  if (begin >= end || end > av.cols()) throw DimensionError("slice_cols: range out of bounds");
  const std::size_t n = av.cols(), w = end - begin;
  Tensor out(av.rows(), w);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.data() + r * n + begin, w, out.data() + r * w);
  }
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {a},
                     [ia, begin, n, w](Tape& t, const Tensor& g) {
                       Tensor& d = t.grad(ia);
                       for (std::size_t r = 0; r < g.rows(); ++r) {
                         double* dr = d.data() + r * n + begin;
                         const double* gr = g.data() + r * w;
                         for (std::size_t j = 0; j < w; ++j) dr[j] += gr[j];
                       }
                     },
                     "slice_cols");
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  const std::size_t n = av.cols();
  Tensor out(rows.size(), n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(rows[i]) + " out of range");
    }
    std::copy_n(av.data() + rows[i] * n, n, out.data() + i * n);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {a},
                     [ia, idx = std::move(idx), n](Tape& t, const Tensor& g) {
                       Tensor& d = t.grad(ia);
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         double* dr = d.data() + idx[i] * n;
                         const double* gr = g.data() + i * n;
                         for (std::size_t j = 0; j < n; ++j) dr[j] += gr[j];
                       }
                     },
                     "gather_rows");
}

Var row_normalize(Var a, double eps) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  const std::size_t n = av.cols();
  Tensor out = av;
  std::vector<double> norms(av.rows());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) ss += av(r, j) * av(r, j);
    norms[r] = std::sqrt(ss + eps);
    for (std::size_t j = 0; j < n; ++j) out(r, j) /= norms[r];
  }
  const std::size_t ia = a.id();
  const std::size_t io = tape.size();
  return tape.record(std::move(out), {a},
                     [ia, io, norms = std::move(norms), n](Tape& t, const Tensor& g) {
                       // d(x/|x|) = (g - y (y.g)) / |x|
                       Tensor& d = t.grad(ia);
                       const Tensor& y = t.value(io);
                       for (std::size_t r = 0; r < norms.size(); ++r) {
                         double yg = 0.0;
                         for (std::size_t j = 0; j < n; ++j) yg += y(r, j) * g(r, j);
                         for (std::size_t j = 0; j < n; ++j) {
                           d(r, j) += (g(r, j) - y(r, j) * yg) / norms[r];
                         }
                       }
                     },
                     "row_normalize");
}

Var log_softmax_rows(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  const std::size_t n = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* o = out.data() + r * n;
    const double mx = *std::max_element(o, o + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(o[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) o[j] -= lse;
  }
  const std::size_t ia = a.id();
  const std::size_t io = tape.size();
  return tape.record(std::move(out), {a},
                     [ia, io, n](Tape& t, const Tensor& g) {
                       Tensor& d = t.grad(ia);
                       const Tensor& y = t.value(io);
                       for (std::size_t r = 0; r < y.rows(); ++r) {
                         double gs = 0.0;
                         for (std::size_t j = 0; j < n; ++j) gs += g(r, j);
                         for (std::size_t j = 0; j < n; ++j) d(r, j) += g(r, j) - std::exp(y(r, j)) * gs;
                       }
                     },
                     "log_softmax");
}

Var pick(Var a, std::span<const Entry> entries) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  Tensor out(entries.size(), 1);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].row >= av.rows() || entries[i].col >= av.cols()) {
      throw DimensionError("pick: entry out of range for " + av.shape_string());
    }
    out[i] = av(entries[i].row, entries[i].col);
  }
  std::vector<Entry> es(entries.begin(), entries.end());
  const std::size_t ia = a.id();
  return tape.record(std::move(out), {a},
                     [ia, es = std::move(es)](Tape& t, const Tensor& g) {
                       Tensor& d = t.grad(ia);
                       for (std::size_t i = 0; i < es.size(); ++i) d(es[i].row, es[i].col) += g[i];
                     },
                     "pick");
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t ia = a.id();
  return tape.record(Tensor::scalar(s), {a},
                     [ia](Tape& t, const Tensor& g) {
                       Tensor& d = t.grad(ia);
                       for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0];
                     },
                     "sum");
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var weighted_sq_error(Var a, const Tensor& target, std::span<const double> row_weights) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  require_same_shape(av, target, "weighted_sq_error");
  if (row_weights.size() != av.rows()) throw DimensionError("weighted_sq_error: weight count");
  const std::size_t n = av.cols();
  double total = 0.0;
  for (std::size_t r = 0; r < av.rows(); ++r) {
    if (row_weights[r] == 0.0) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = av(r, j) - target(r, j);
      s += e * e;
    }
    total += row_weights[r] * s;
  }
  std::vector<double> w(row_weights.begin(), row_weights.end());
  const std::size_t ia = a.id();
  return tape.record(Tensor::scalar(total), {a},
                     [ia, target, w = std::move(w), n](Tape& t, const Tensor& g) {
                       Tensor& d = t.grad(ia);
                       const Tensor& x = t.value(ia);
                       for (std::size_t r = 0; r < w.size(); ++r) {
                         if (w[r] == 0.0) continue;
                         const double c = 2.0 * w[r] * g[0];
                         for (std::size_t j = 0; j < n; ++j) d(r, j) += c * (x(r, j) - target(r, j));
                       }
                     },
                     "weighted_sq_error");
}

Var weighted_sum(Var a, std::span<const double> weights) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  if (weights.size() != av.size()) throw DimensionError("weighted_sum: weight count");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += weights[i] * av[i];
  std::vector<double> w(weights.begin(), weights.end());
  const std::size_t ia = a.id();
  return tape.record(Tensor::scalar(s), {a},
                     [ia, w = std::move(w)](Tape& t, const Tensor& g) {
                       Tensor& d = t.grad(ia);
                       for (std::size_t i = 0; i < w.size(); ++i) d[i] += w[i] * g[0];
                     },
                     "weighted_sum");
}

}  // namespace awe::nn
