#include "awe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "awe/error.hpp"

namespace awe::nn {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t expected =
      std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  if (shape_.empty() || expected != data_.size()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
  }
}

Tensor Tensor::vector(std::size_t n, double fill) {
  return Tensor({n}, std::vector<double>(n, fill));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

void require_finite(const Tensor& t, std::string_view what) {
  const auto values = t.values();
  // v * 0 is NaN exactly for NaN and +-inf, so a plain sum screens the
  // whole tensor in one vectorizable pass.
  double probe = 0.0;
  for (double v : values) probe += v * 0.0;
  if (probe == 0.0) return;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError("non-finite value " + std::to_string(values[i]) + " at flat index " +
                         std::to_string(i) + " in " + std::string(what));
    }
  }
}

namespace {

void check_out(Tensor& c, std::size_t rows, std::size_t cols, bool accumulate, const char* op) {
  if (accumulate) {
    if (c.rows() != rows || c.cols() != cols) {
      throw DimensionError(std::string(op) + ": accumulator has shape " + c.shape_string());
    }
  } else if (c.rank() != 2 || c.rows() != rows || c.cols() != cols) {
    c = Tensor(rows, cols);
  } else {
    c.fill(0.0);
  }
}

}  // namespace

namespace {

// Register tile: R rows x kBlock columns accumulated across the whole k
// loop. Every output element is c + sum_p a[i][p] * b[p][j] in ascending p,
// the same order as the scalar edge code, so results do not depend on where
// a row or column falls relative to the tiles.
#if defined(__AVX512F__)
constexpr std::size_t kLanes = 8;
#else
constexpr std::size_t kLanes = 4;
#endif
constexpr std::size_t kBlock = 2 * kLanes;
typedef double vd __attribute__((vector_size(kLanes * sizeof(double))));

inline vd load(const double* p) {
  vd v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store(double* p, vd v) { std::memcpy(p, &v, sizeof v); }

template <std::size_t R>
void tile(std::size_t k, const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc) {
  vd lo[R];
  vd hi[R];
  for (std::size_t q = 0; q < R; ++q) {
    lo[q] = load(c + q * ldc);
    hi[q] = load(c + q * ldc + kLanes);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const vd b0 = load(b + p * ldb);
    const vd b1 = load(b + p * ldb + kLanes);
    for (std::size_t q = 0; q < R; ++q) {
      const vd s = vd{} + a[q * lda + p];
      lo[q] += s * b0;
      hi[q] += s * b1;
    }
  }
  for (std::size_t q = 0; q < R; ++q) {
    store(c + q * ldc, lo[q]);
    store(c + q * ldc + kLanes, hi[q]);
  }
}

void edge(std::size_t rows, std::size_t k, std::size_t cols, const double* a, std::size_t lda, const double* b,
          std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t q = 0; q < rows; ++q) {
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = c[q * ldc + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[q * lda + p] * b[p * ldb + j];
      c[q * ldc + j] = acc;
    }
  }
}

}  // namespace

void gemm_acc(std::size_t m, std::size_t k, std::size_t n, const double* a, std::size_t lda, const double* b,
              std::size_t ldb, double* c, std::size_t ldc) {
  const std::size_t nb = n - n % kBlock;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    for (std::size_t j = 0; j < nb; j += kBlock) tile<4>(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    edge(4, k, n - nb, a + i * lda, lda, b + nb, ldb, c + i * ldc + nb, ldc);
  }
  for (; i < m; ++i) {
    for (std::size_t j = 0; j < nb; j += kBlock) tile<1>(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    edge(1, k, n - nb, a + i * lda, lda, b + nb, ldb, c + i * ldc + nb, ldc);
  }
}

namespace {

// c[R rows x kBlock] += a[:, p0:p0+R]^T * b[:, j0:j0+kBlock], ascending i.
template <std::size_t R>
void tile_tn(std::size_t m, const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc) {
  vd lo[R];
  vd hi[R];
  for (std::size_t q = 0; q < R; ++q) {
    lo[q] = load(c + q * ldc);
    hi[q] = load(c + q * ldc + kLanes);
  }
  for (std::size_t i = 0; i < m; ++i) {
    const vd b0 = load(b + i * ldb);
    const vd b1 = load(b + i * ldb + kLanes);
    for (std::size_t q = 0; q < R; ++q) {
      const vd s = vd{} + a[i * lda + q];
      lo[q] += s * b0;
      hi[q] += s * b1;
    }
  }
  for (std::size_t q = 0; q < R; ++q) {
    store(c + q * ldc, lo[q]);
    store(c + q * ldc + kLanes, hi[q]);
  }
}

void edge_tn(std::size_t m, std::size_t rows, std::size_t cols, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t q = 0; q < rows; ++q) {
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = c[q * ldc + j];
      for (std::size_t i = 0; i < m; ++i) acc += a[i * lda + q] * b[i * ldb + j];
      c[q * ldc + j] = acc;
    }
  }
}

}  // namespace

void gemm_tn_acc(std::size_t m, std::size_t k, std::size_t n, const double* a, std::size_t lda, const double* b,
                 std::size_t ldb, double* c, std::size_t ldc) {
  // Chunks of rows keep the touched part of b cache-resident; each element
  // still accumulates in ascending i.
  constexpr std::size_t kChunk = 64;
  const std::size_t nb = n - n % kBlock;
  for (std::size_t i0 = 0; i0 < m; i0 += kChunk) {
    const std::size_t mc = std::min(kChunk, m - i0);
    const double* ai = a + i0 * lda;
    const double* bi = b + i0 * ldb;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      for (std::size_t j = 0; j < nb; j += kBlock) tile_tn<4>(mc, ai + p, lda, bi + j, ldb, c + p * ldc + j, ldc);
      edge_tn(mc, 4, n - nb, ai + p, lda, bi + nb, ldb, c + p * ldc + nb, ldc);
    }
    for (; p < k; ++p) {
      for (std::size_t j = 0; j < nb; j += kBlock) tile_tn<1>(mc, ai + p, lda, bi + j, ldb, c + p * ldc + j, ldc);
      edge_tn(mc, 1, n - nb, ai + p, lda, bi + nb, ldb, c + p * ldc + nb, ldc);
    }
  }
}

void gemm(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: " + a.shape_string() + " x " + b.shape_string());
  }
  check_out(c, m, n, accumulate, "matmul");
  gemm_acc(m, k, n, a.data(), k, b.data(), n, c.data(), n);
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: " + a.shape_string() + " x " + b.shape_string() + "^T");
  }
  gemm(a, transpose(b), c, accumulate);
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != m) {
    throw DimensionError("matmul_tn: " + a.shape_string() + "^T x " + b.shape_string());
  }
  check_out(c, k, n, accumulate, "matmul_tn");
  gemm_tn_acc(m, k, n, a.data(), k, b.data(), n, c.data(), n);
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor t(n, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) t(j, i) = a(i, j);
  }
  return t;
}

}  // namespace awe::nn
