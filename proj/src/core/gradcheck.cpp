// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace trajattn {

namespace {
// Gradients below this norm are compared absolutely; central differences at
// eps = 1e-5 carry roughly 1e-10 of noise.
constexpr double kGradFloor = 1e-8;
}  // namespace

Tensor fd_gradient(const ScalarFn& f, const Tensor& x, double eps) {
  require(eps > 0.0, ErrorCode::kInvalidArgument, "fd eps must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double fp = f(probe);
    probe[i] = orig - eps;
    const double fm = f(probe);
    probe[i] = orig;
    require(std::isfinite(fp) && std::isfinite(fm), ErrorCode::kNumeric,
            "non-finite function value during finite differences");
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

double relative_error(const Tensor& a, const Tensor& b, double floor) {
  const double diff = frobenius_norm(sub(a, b));
  const double scale = std::max({frobenius_norm(a), frobenius_norm(b), floor});
  return diff / scale;
}

GradcheckResult gradcheck(const TapeFn& fn, const std::vector<Tensor>& inputs,
                          double eps) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& x : inputs) leaves.push_back(tape.leaf(x));
  Var out = fn(tape, leaves);
  tape.backward(out);

  GradcheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = tape.grad(leaves[k]);
    ScalarFn f = [&](const Tensor& xk) {
      Tape t;
      std::vector<Var> ls;
      for (std::size_t j = 0; j < inputs.size(); ++j)
        ls.push_back(t.constant(j == k ? xk : inputs[j]));
      return fn(t, ls).value()[0];
    };
    const double err =
        relative_error(analytic, fd_gradient(f, inputs[k], eps), kGradFloor);
    result.per_input.push_back(err);
    result.max_relative_error = std::max(result.max_relative_error, err);
  }
  return result;
}

}  // namespace trajattn
