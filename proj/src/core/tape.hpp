// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "core/tensor.hpp"

namespace trajattn {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
// lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Scalar-slot counters for intermediates that kernels materialise. Kernels
// report into the probe of the tape they record on.
enum class AllocKind : std::size_t {
  kAttentionMatrix = 0,  // score and probability matrices
  kPrototypeBuild = 1,   // candidate pools and selection scratch
};

struct AllocationProbe {
  std::array<std::uint64_t, 2> slots{};

  void note(AllocKind kind, std::uint64_t count) {
    slots[static_cast<std::size_t>(kind)] += count;
  }
  std::uint64_t operator[](AllocKind kind) const {
    return slots[static_cast<std::size_t>(kind)];
  }
};

// Records operations in execution order. Because a node can only reference
// nodes recorded before it, insertion order is a topological order and the
// backward sweep simply walks it in reverse.
class Tape {
 public:
  // Receives the gradient flowing into the node and propagates it to parents
  // through Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Tensor& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  Var constant(Tensor value);
  // Used by op implementations. `fn` is dropped when no parent needs grads.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> parents, BackwardFn fn);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  // Gradient of the last backward() target with respect to v (zeros when v
  // did not influence it).
  Tensor grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1; loss must hold exactly one element.
  void backward(Var loss);

  // Adds g into the gradient accumulator of node id (if it needs one).
  void accumulate(std::size_t id, const Tensor& g);
  // Direct access to the accumulator, allocating zeros on first use.
  Tensor& grad_slot(std::size_t id);

  std::size_t size() const noexcept { return nodes_.size(); }
  // Node ids visited by the most recent backward(), in visit order.
  const std::vector<std::size_t>& backward_trace() const noexcept {
    return trace_;
  }

  AllocationProbe& probe() noexcept { return probe_; }
  const AllocationProbe& probe() const noexcept { return probe_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
  std::vector<std::size_t> trace_;
  AllocationProbe probe_;
};

// Differentiable operations. All operands must live on the same tape.
namespace ad {

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
// a [n, d] + bias broadcast over rows (bias holds d values).
Var add_row(Var a, Var bias);
// Row i of a [n, d] multiplied by w[i] (w holds n values).
Var mul_rows(Var a, Var w);
// [n, d] x [n, d] -> [n, 1] of per-row dot products.
Var rowdot(Var a, Var b);
Var softmax_rows(Var x, double scale);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var gelu(Var x);
Var rows_slice(Var x, std::size_t begin, std::size_t count);
Var cols_slice(Var x, std::size_t begin, std::size_t count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(Var x, std::vector<std::size_t> index);
Var sum(Var x);
Var mean(Var x);
// Sum over parts, all of identical shape.
Var add_n(std::span<const Var> parts);
// Sum of x * weights with constant weights; a generic scalar probe for
// gradient checks.
Var weighted_sum(Var x, const Tensor& weights);
// Softmax cross-entropy of a single logits row against a class label.
Var cross_entropy(Var logits, std::size_t label);

}  // namespace ad

}  // namespace trajattn
