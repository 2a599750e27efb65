#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace awe::nn {

// Dense float64 tensor in row-major order. Rank 1 and rank 2 are the only
// ranks the workbench uses; a rank-1 tensor behaves as a 1 x n row.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor vector(std::size_t n, double fill = 0.0);
  static Tensor vector(std::vector<double> values);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const {
    if (shape_.size() == 2) return shape_[0];
    return shape_.empty() ? 0 : 1;
  }
  std::size_t cols() const {
    if (shape_.size() == 2) return shape_[1];
    return shape_.empty() ? 0 : shape_[0];
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(double v);

  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Throws NumericError naming `what` when any entry is NaN or infinite.
void require_finite(const Tensor& t, std::string_view what);

// C = A * B, C = A * B^T, C = A^T * B. Each output row of matmul and
// matmul_nt depends only on the matching row of A, with a fixed summation
// order, so batched and unbatched evaluation agree bit for bit.
void gemm(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate = false);

Tensor transpose(const Tensor& a);

// Strided kernels on raw row-major storage (ld* = row stride).
// c[m x n] += a[m x k] * b[k x n]
void gemm_acc(std::size_t m, std::size_t k, std::size_t n, const double* a, std::size_t lda, const double* b,
              std::size_t ldb, double* c, std::size_t ldc);
// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn_acc(std::size_t m, std::size_t k, std::size_t n, const double* a, std::size_t lda, const double* b,
                 std::size_t ldb, double* c, std::size_t ldc);

}  // namespace awe::nn
