// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "core/tape.hpp"
#include "core/tensor.hpp"

namespace trajattn {

using ScalarFn = std::function<double(const Tensor&)>;

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) for every
// coordinate. Throws if f is not finite at a probe point.
Tensor fd_gradient(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

// ||a - b|| / max(||a||, ||b||, floor); the norm-wise error used by every
// gradient check in this project.
double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-12);

// Builds a scalar on a fresh tape from leaves holding `inputs`.
using TapeFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::vector<double> per_input;
};

// Compares tape gradients of `fn` with central differences, input by input.
GradcheckResult gradcheck(const TapeFn& fn, const std::vector<Tensor>& inputs,
                          double eps = 1e-5);

}  // namespace trajattn
