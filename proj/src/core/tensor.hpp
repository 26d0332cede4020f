// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace trajattn {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major array of doubles. Every dimension is positive; a rank-0
// tensor holds a single scalar.
class Tensor {
 public:
  Tensor() : shape_{}, data_(1, 0.0) {}
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value) { return Tensor({}, {value}); }
  static Tensor identity(std::size_t n);
  // Rows given as nested initializer lists; all rows must have equal length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }

  // Product of all but the last dimension, and the last dimension.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }
  std::span<double> row(std::size_t r) {
    return std::span<double>(data_).subspan(r * cols(), cols());
  }

  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Bitwise comparison of shape and payload.
bool identical(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);
double frobenius_norm(const Tensor& a);

// ---- pure kernels -------------------------------------------------------

// [..., m, k] x [k, n] -> [..., m, n]; or [B..., m, k] x [B..., k, n].
Tensor matmul(const Tensor& a, const Tensor& b);
// a [m, k] times b [n, k] transposed -> [m, n].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// a [k, m] transposed times b [k, n] -> [m, n].
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scaled(const Tensor& a, double s);

// Row-wise softmax over the last axis of x * scale, stabilised by the row max.
Tensor softmax_rows(const Tensor& x, double scale = 1.0);

// Normalises each row over the last axis, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Exact erf formulation.
double gelu(double x);
double gelu_grad(double x);
Tensor gelu(const Tensor& x);

// Contiguous row range [begin, begin + count) of a matrix view of x.
Tensor rows_slice(const Tensor& x, std::size_t begin, std::size_t count);
Tensor cols_slice(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);

void check_finite(const Tensor& t, const char* where);

}  // namespace trajattn
