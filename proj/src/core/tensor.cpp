// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "core/error.hpp"

namespace trajattn {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace {

void check_dims(const Shape& shape) {
  for (std::size_t d : shape) {
    require(d > 0, ErrorCode::kShapeMismatch,
            [&] { return "tensor dimensions must be positive, got " + shape_str(shape); });
  }
}

void require_matrix(const Tensor& t, const char* what) {
  require(t.rank() == 2, ErrorCode::kShapeMismatch,
          [&] { return std::string(what) + " expects a matrix, got " + shape_str(t.shape()); });
}

// C[m,n] += A[m,k] * B[k,n], all row-major.
void gemm_acc(std::size_t m, std::size_t k, std::size_t n, const double* a,
              const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

Tensor elementwise(const Tensor& a, const Tensor& b, const char* name,
                   double (*fn)(double, double)) {
  require(a.shape() == b.shape(), ErrorCode::kShapeMismatch,
          [&] { return std::string(name) + ": shape mismatch " + shape_str(a.shape()) +
              " vs " + shape_str(b.shape()); });
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(x[i], y[i]);
  return out;
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(shape_numel(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  require(shape_numel(shape_) == data_.size(), ErrorCode::kShapeMismatch,
          [&] { return "payload of " + std::to_string(data_.size()) +
              " values does not fill shape " + shape_str(shape_); });
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::matrix(
    std::initializer_list<std::initializer_list<double>> rows) {
  require(rows.size() > 0, ErrorCode::kShapeMismatch, "empty matrix literal");
  const std::size_t n = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * n);
  for (const auto& r : rows) {
    require(r.size() == n, ErrorCode::kShapeMismatch,
            "ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), n}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  require(axis < shape_.size(), ErrorCode::kShapeMismatch,
          [&] { return "axis " + std::to_string(axis) + " out of range for shape " +
              shape_str(shape_); });
  return shape_[axis];
}

std::size_t Tensor::rows() const noexcept {
  return shape_.empty() ? 1 : data_.size() / shape_.back();
}

std::size_t Tensor::cols() const noexcept {
  return shape_.empty() ? 1 : shape_.back();
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

bool identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(),
                     a.size() * sizeof(double)) == 0;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require(a.size() == b.size(), ErrorCode::kShapeMismatch,
          [&] { return "max_abs_diff: size mismatch " + shape_str(a.shape()) + " vs " +
              shape_str(b.shape()); });
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double frobenius_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() >= 2 && b.rank() >= 2, ErrorCode::kShapeMismatch,
          [&] { return "matmul: operands must have rank >= 2, got " + shape_str(a.shape()) +
              " and " + shape_str(b.shape()); });
  const std::size_t k = a.cols();
  const std::size_t n = b.cols();
  const std::size_t kb = b.shape()[b.rank() - 2];
  require(k == kb, ErrorCode::kShapeMismatch,
          [&] { return "matmul: inner dimensions differ for " + shape_str(a.shape()) +
              " x " + shape_str(b.shape()); });
  Shape out_shape = a.shape();
  out_shape.back() = n;
  Tensor out(out_shape);
  if (b.rank() == 2) {
    gemm_acc(a.rows(), k, n, a.data().data(), b.data().data(),
             out.data().data());
    return out;
  }
  require(a.rank() == b.rank() &&
              std::equal(a.shape().begin(), a.shape().end() - 2,
                         b.shape().begin()),
          ErrorCode::kShapeMismatch,
          [&] { return "matmul: batch dimensions differ for " + shape_str(a.shape()) +
              " x " + shape_str(b.shape()); });
  const std::size_t m = a.shape()[a.rank() - 2];
  const std::size_t batch = a.size() / (m * k);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    gemm_acc(m, k, n, a.data().data() + bi * m * k,
             b.data().data() + bi * k * n, out.data().data() + bi * m * n);
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  require(a.dim(1) == b.dim(1), ErrorCode::kShapeMismatch,
          [&] { return "matmul_nt: inner dimensions differ for " + shape_str(a.shape()) +
              " x " + shape_str(b.shape()) + "^T"; });
  return matmul(a, transpose(b));
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  require(a.dim(0) == b.dim(0), ErrorCode::kShapeMismatch,
          [&] { return "matmul_tn: inner dimensions differ for " + shape_str(a.shape()) +
              "^T x " + shape_str(b.shape()); });
  const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  double* c = out.data().data();
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a.data().data() + p * m;
    const double* __restrict brow = b.data().data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* __restrict crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  return elementwise(a, b, "hadamard",
                     [](double x, double y) { return x * y; });
}

Tensor scaled(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

Tensor softmax_rows(const Tensor& x, double scale) {
  require(x.rank() >= 1, ErrorCode::kShapeMismatch, "empty softmax axis");
  require(scale > 0.0, ErrorCode::kInvalidArgument,
          "softmax scale must be positive");
  Tensor out(x.shape());
  const std::size_t n = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    double m = -INFINITY;
    for (double v : in) {
      require(std::isfinite(v), ErrorCode::kNumeric,
              "non-finite softmax input");
      m = std::max(m, v * scale);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] * scale - m);
      z += o[j];
    }
    const double inv = 1.0 / z;
    for (double& v : o) v *= inv;
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  require(x.rank() >= 1, ErrorCode::kShapeMismatch,
          "layer_norm expects rank >= 1");
  const std::size_t d = x.cols();
  require(gain.size() == d && bias.size() == d, ErrorCode::kShapeMismatch,
          [&] { return "layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
              shape_str(bias.shape()) + " do not match width " +
              std::to_string(d); });
  require(eps > 0.0, ErrorCode::kInvalidArgument,
          "layer_norm eps must be positive");
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j)
      o[j] = (in[j] - mean) * inv * gain[j] + bias[j];
  }
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Tensor gelu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gelu(x[i]);
  return out;
}

Tensor rows_slice(const Tensor& x, std::size_t begin, std::size_t count) {
  require(x.rank() >= 1 && count > 0 && begin + count <= x.rows(),
          ErrorCode::kShapeMismatch,
          [&] { return "rows_slice [" + std::to_string(begin) + ", +" +
              std::to_string(count) + ") out of range for " +
              shape_str(x.shape()); });
  const std::size_t c = x.cols();
  std::vector<double> data(x.data().begin() + begin * c,
                           x.data().begin() + (begin + count) * c);
  return Tensor({count, c}, std::move(data));
}

Tensor cols_slice(const Tensor& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "cols_slice");
  require(count > 0 && begin + count <= x.cols(), ErrorCode::kShapeMismatch,
          [&] { return "cols_slice [" + std::to_string(begin) + ", +" +
              std::to_string(count) + ") out of range for " +
              shape_str(x.shape()); });
  Tensor out({x.rows(), count});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto src = x.row(r).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), ErrorCode::kShapeMismatch, "concat_rows: no parts");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.cols() == c, ErrorCode::kShapeMismatch,
            [&] { return "concat_rows: width mismatch " + shape_str(parts[0].shape()) +
                " vs " + shape_str(p.shape()); });
    total += p.rows();
  }
  std::vector<double> data;
  data.reserve(total * c);
  for (const auto& p : parts)
    data.insert(data.end(), p.data().begin(), p.data().end());
  return Tensor({total, c}, std::move(data));
}

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), ErrorCode::kShapeMismatch, "concat_cols: no parts");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.rows() == r, ErrorCode::kShapeMismatch,
            [&] { return "concat_cols: height mismatch " + shape_str(parts[0].shape()) +
                " vs " + shape_str(p.shape()); });
    total += p.cols();
  }
  Tensor out({r, total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < r; ++i) {
      auto src = p.row(i);
      std::copy(src.begin(), src.end(), out.row(i).begin() + off);
    }
    off += p.cols();
  }
  return out;
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  require(!index.empty(), ErrorCode::kShapeMismatch, "gather_rows: empty index");
  const std::size_t c = x.cols();
  Tensor out({index.size(), c});
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < x.rows(), ErrorCode::kShapeMismatch,
            [&] { return "gather_rows: index " + std::to_string(index[i]) +
                " out of range for " + shape_str(x.shape()); });
    auto src = x.row(index[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void check_finite(const Tensor& t, const char* where) {
#ifndef NDEBUG
  require(t.all_finite(), ErrorCode::kNumeric,
          [&] { return std::string("non-finite value produced by ") + where; });
#else
  (void)t;
  (void)where;
#endif
}

}  // namespace trajattn
