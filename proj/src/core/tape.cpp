// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "core/tape.hpp"

#include <cmath>

#include "core/error.hpp"

namespace trajattn {

const Tensor& Var::value() const {
  require(tape != nullptr, ErrorCode::kInternal, "unbound Var");
  return tape->value(*this);
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), false, true, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), false, false, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents,
                 BackwardFn fn) {
  return record(std::move(value),
                std::span<const Var>(parents.begin(), parents.size()),
                std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  for (const Var& p : parents) {
    require(p.tape == this, ErrorCode::kInternal,
            "operand recorded on a different tape");
    needs = needs || nodes_.at(p.id).requires_grad;
  }
  check_finite(value, "tape op");
  nodes_.push_back(
      Node{std::move(value), Tensor(), false, needs, needs ? std::move(fn) : nullptr});
  return Var{this, nodes_.size() - 1};
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.has_grad ? n.grad : Tensor(n.value.shape());
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_.at(id);
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  if (!nodes_.at(id).requires_grad) return;
  Tensor& slot = grad_slot(id);
  require(slot.size() == g.size(), ErrorCode::kInternal,
          [&] { return "gradient shape " + shape_str(g.shape()) + " does not match value " +
              shape_str(slot.shape()); });
  auto s = slot.data();
  auto d = g.data();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += d[i];
}

void Tape::backward(Var loss) {
  require(loss.tape == this, ErrorCode::kInternal, "loss from another tape");
  require(value(loss).size() == 1, ErrorCode::kShapeMismatch,
          [&] { return "backward needs a single-element loss, got " +
              shape_str(value(loss).shape()); });
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  trace_.clear();
  if (!nodes_[loss.id].requires_grad) return;
  grad_slot(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    trace_.push_back(i);
    if (n.backward) n.backward(*this, n.grad);
  }
}

namespace ad {

namespace {

Tape& tape_of(Var a) {
  require(a.tape != nullptr, ErrorCode::kInternal, "unbound Var");
  return *a.tape;
}

void require_same_tape(Var a, Var b) {
  require(a.tape == b.tape && a.tape != nullptr, ErrorCode::kInternal,
          "operands live on different tapes");
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = tape_of(a);
  const std::size_t ia = a.id, ib = b.id;
  return t.record(trajattn::matmul(a.value(), b.value()), {a, b},
                  [ia, ib](Tape& t, const Tensor& g) {
                    if (t.requires_grad(ia))
                      t.accumulate(ia, trajattn::matmul_nt(g, t.value(ib)));
                    if (t.requires_grad(ib))
                      t.accumulate(ib, trajattn::matmul_tn(t.value(ia), g));
                  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b);
  Tape& t = tape_of(a);
  const std::size_t ia = a.id, ib = b.id;
  return t.record(trajattn::matmul_nt(a.value(), b.value()), {a, b},
                  [ia, ib](Tape& t, const Tensor& g) {
                    if (t.requires_grad(ia))
                      t.accumulate(ia, trajattn::matmul(g, t.value(ib)));
                    if (t.requires_grad(ib))
                      t.accumulate(ib, trajattn::matmul_tn(g, t.value(ia)));
                  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  const std::size_t ia = a.id, ib = b.id;
  return tape_of(a).record(trajattn::add(a.value(), b.value()), {a, b},
                           [ia, ib](Tape& t, const Tensor& g) {
                             t.accumulate(ia, g);
                             t.accumulate(ib, g);
                           });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  const std::size_t ia = a.id, ib = b.id;
  return tape_of(a).record(trajattn::sub(a.value(), b.value()), {a, b},
                           [ia, ib](Tape& t, const Tensor& g) {
                             t.accumulate(ia, g);
                             t.accumulate(ib, trajattn::scaled(g, -1.0));
                           });
}

Var hadamard(Var a, Var b) {
  require_same_tape(a, b);
  const std::size_t ia = a.id, ib = b.id;
  return tape_of(a).record(
      trajattn::hadamard(a.value(), b.value()), {a, b},
      [ia, ib](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) t.accumulate(ia, trajattn::hadamard(g, t.value(ib)));
        if (t.requires_grad(ib)) t.accumulate(ib, trajattn::hadamard(g, t.value(ia)));
      });
}

Var scale(Var a, double s) {
  const std::size_t ia = a.id;
  return tape_of(a).record(trajattn::scaled(a.value(), s), {a},
                           [ia, s](Tape& t, const Tensor& g) {
                             t.accumulate(ia, trajattn::scaled(g, s));
                           });
}

Var add_row(Var a, Var bias) {
  require_same_tape(a, bias);
  const Tensor& x = a.value();
  const Tensor& b = bias.value();
  require(b.size() == x.cols(), ErrorCode::kShapeMismatch,
          [&] { return "add_row: bias " + shape_str(b.shape()) + " does not match " +
              shape_str(x.shape()); });
  Tensor out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  }
  const std::size_t ia = a.id, ib = bias.id;
  return tape_of(a).record(std::move(out), {a, bias},
                           [ia, ib](Tape& t, const Tensor& g) {
                             t.accumulate(ia, g);
                             if (!t.requires_grad(ib)) return;
                             Tensor& gb = t.grad_slot(ib);
                             for (std::size_t r = 0; r < g.rows(); ++r) {
                               auto row = g.row(r);
                               for (std::size_t j = 0; j < row.size(); ++j)
                                 gb[j] += row[j];
                             }
                           });
}

Var mul_rows(Var a, Var w) {
  require_same_tape(a, w);
  const Tensor& x = a.value();
  const Tensor& wv = w.value();
  require(wv.size() == x.rows(), ErrorCode::kShapeMismatch,
          [&] { return "mul_rows: weights " + shape_str(wv.shape()) + " do not match " +
              shape_str(x.shape()); });
  Tensor out = x;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (double& v : out.row(r)) v *= wv[r];
  const std::size_t ia = a.id, iw = w.id;
  return tape_of(a).record(
      std::move(out), {a, w}, [ia, iw](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(ia);
        const Tensor& wv = t.value(iw);
        if (t.requires_grad(ia)) {
          Tensor& ga = t.grad_slot(ia);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            auto gr = g.row(r);
            auto out = ga.row(r);
            for (std::size_t j = 0; j < gr.size(); ++j) out[j] += wv[r] * gr[j];
          }
        }
        if (t.requires_grad(iw)) {
          Tensor& gw = t.grad_slot(iw);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            auto gr = g.row(r);
            auto xr = x.row(r);
            double s = 0.0;
            for (std::size_t j = 0; j < gr.size(); ++j) s += gr[j] * xr[j];
            gw[r] += s;
          }
        }
      });
}

Var rowdot(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require(x.shape() == y.shape() && x.rank() == 2, ErrorCode::kShapeMismatch,
          [&] { return "rowdot: shapes " + shape_str(x.shape()) + " and " +
              shape_str(y.shape()) + " must be equal matrices"; });
  Tensor out({x.rows(), 1});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    auto yr = y.row(r);
    double s = 0.0;
    for (std::size_t j = 0; j < xr.size(); ++j) s += xr[j] * yr[j];
    out[r] = s;
  }
  const std::size_t ia = a.id, ib = b.id;
  return tape_of(a).record(
      std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
        for (auto [self, other] : {std::pair{ia, ib}, std::pair{ib, ia}}) {
          if (!t.requires_grad(self)) continue;
          Tensor& gs = t.grad_slot(self);
          const Tensor& o = t.value(other);
          for (std::size_t r = 0; r < o.rows(); ++r) {
            auto orow = o.row(r);
            auto grow = gs.row(r);
            for (std::size_t j = 0; j < orow.size(); ++j) grow[j] += g[r] * orow[j];
          }
        }
      });
}

Var softmax_rows(Var x, double scale) {
  const std::size_t ix = x.id;
  Tape& t = tape_of(x);
  // The backward closure reads this node's own output, whose id is the next
  // slot on the tape.
  const std::size_t iy = t.size();
  return t.record(trajattn::softmax_rows(x.value(), scale), {x},
                  [ix, iy, scale](Tape& t, const Tensor& g) {
                    const Tensor& p = t.value(iy);
                    Tensor& gx = t.grad_slot(ix);
                    for (std::size_t r = 0; r < p.rows(); ++r) {
                      auto pr = p.row(r);
                      auto gr = g.row(r);
                      auto out = gx.row(r);
                      double dot = 0.0;
                      for (std::size_t j = 0; j < pr.size(); ++j) dot += gr[j] * pr[j];
                      for (std::size_t j = 0; j < pr.size(); ++j)
                        out[j] += scale * pr[j] * (gr[j] - dot);
                    }
                  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_tape(x, gain);
  require_same_tape(x, bias);
  Tape& t = tape_of(x);
  const std::size_t ix = x.id, ig = gain.id, ib = bias.id;
  return t.record(
      trajattn::layer_norm(x.value(), gain.value(), bias.value(), eps),
      {x, gain, bias}, [ix, ig, ib, eps](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(ix);
        const Tensor& gv = t.value(ig);
        const std::size_t d = xv.cols();
        const double inv_d = 1.0 / static_cast<double>(d);
        std::vector<double> xhat(d), gh(d);
        for (std::size_t r = 0; r < xv.rows(); ++r) {
          auto in = xv.row(r);
          auto gr = g.row(r);
          double mean = 0.0;
          for (double v : in) mean += v;
          mean *= inv_d;
          double var = 0.0;
          for (double v : in) var += (v - mean) * (v - mean);
          var *= inv_d;
          const double inv = 1.0 / std::sqrt(var + eps);
          double sum_gh = 0.0, sum_ghx = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            xhat[j] = (in[j] - mean) * inv;
            gh[j] = gr[j] * gv[j];
            sum_gh += gh[j];
            sum_ghx += gh[j] * xhat[j];
          }
          if (t.requires_grad(ix)) {
            auto out = t.grad_slot(ix).row(r);
            for (std::size_t j = 0; j < d; ++j)
              out[j] += inv * (gh[j] - inv_d * sum_gh - xhat[j] * inv_d * sum_ghx);
          }
          if (t.requires_grad(ig)) {
            Tensor& gg = t.grad_slot(ig);
            for (std::size_t j = 0; j < d; ++j) gg[j] += gr[j] * xhat[j];
          }
          if (t.requires_grad(ib)) {
            Tensor& gb = t.grad_slot(ib);
            for (std::size_t j = 0; j < d; ++j) gb[j] += gr[j];
          }
        }
      });
}

Var gelu(Var x) {
  const std::size_t ix = x.id;
  return tape_of(x).record(trajattn::gelu(x.value()), {x},
                           [ix](Tape& t, const Tensor& g) {
                             const Tensor& xv = t.value(ix);
                             Tensor& gx = t.grad_slot(ix);
                             for (std::size_t i = 0; i < g.size(); ++i)
                               gx[i] += g[i] * trajattn::gelu_grad(xv[i]);
                           });
}

Var rows_slice(Var x, std::size_t begin, std::size_t count) {
  const std::size_t ix = x.id;
  return tape_of(x).record(
      trajattn::rows_slice(x.value(), begin, count), {x},
      [ix, begin](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_slot(ix);
        const std::size_t off = begin * gx.cols();
        for (std::size_t i = 0; i < g.size(); ++i) gx[off + i] += g[i];
      });
}

Var cols_slice(Var x, std::size_t begin, std::size_t count) {
  const std::size_t ix = x.id;
  return tape_of(x).record(
      trajattn::cols_slice(x.value(), begin, count), {x},
      [ix, begin](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_slot(ix);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          auto src = g.row(r);
          auto dst = gx.row(r).subspan(begin, src.size());
          for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
        }
      });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), ErrorCode::kShapeMismatch, "concat_rows: no parts");
  std::vector<Tensor> values;
  values.reserve(parts.size());
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p);
    values.push_back(p.value());
    ids.push_back(p.id);
  }
  return tape_of(parts[0]).record(
      trajattn::concat_rows(values), parts,
      [ids](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (std::size_t id : ids) {
          const std::size_t n = t.value(id).size();
          if (t.requires_grad(id)) {
            Tensor& gp = t.grad_slot(id);
            for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
          }
          off += n;
        }
      });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), ErrorCode::kShapeMismatch, "concat_cols: no parts");
  std::vector<Tensor> values;
  values.reserve(parts.size());
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p);
    values.push_back(p.value());
    ids.push_back(p.id);
  }
  return tape_of(parts[0]).record(
      trajattn::concat_cols(values), parts,
      [ids](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (std::size_t id : ids) {
          const std::size_t w = t.value(id).cols();
          if (t.requires_grad(id)) {
            Tensor& gp = t.grad_slot(id);
            for (std::size_t r = 0; r < g.rows(); ++r) {
              auto src = g.row(r).subspan(off, w);
              auto dst = gp.row(r);
              for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
            }
          }
          off += w;
        }
      });
}

Var gather_rows(Var x, std::vector<std::size_t> index) {
  const std::size_t ix = x.id;
  Tensor out = trajattn::gather_rows(x.value(), index);
  return tape_of(x).record(
      std::move(out), {x}, [ix, index = std::move(index)](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_slot(ix);
        for (std::size_t i = 0; i < index.size(); ++i) {
          auto src = g.row(i);
          auto dst = gx.row(index[i]);
          for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
        }
      });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const std::size_t ix = x.id;
  return tape_of(x).record(Tensor::scalar(s), {x},
                           [ix](Tape& t, const Tensor& g) {
                             Tensor& gx = t.grad_slot(ix);
                             for (double& v : gx.data()) v += g[0];
                           });
}

Var mean(Var x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var add_n(std::span<const Var> parts) {
  require(!parts.empty(), ErrorCode::kShapeMismatch, "add_n: no parts");
  Tensor out = parts[0].value();
  std::vector<std::size_t> ids{parts[0].id};
  for (std::size_t i = 1; i < parts.size(); ++i) {
    require_same_tape(parts[0], parts[i]);
    const Tensor& v = parts[i].value();
    require(v.shape() == out.shape(), ErrorCode::kShapeMismatch,
            [&] { return "add_n: shape mismatch " + shape_str(out.shape()) + " vs " +
                shape_str(v.shape()); });
    auto o = out.data();
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += v[j];
    ids.push_back(parts[i].id);
  }
  return tape_of(parts[0]).record(std::move(out), parts,
                                  [ids](Tape& t, const Tensor& g) {
                                    for (std::size_t id : ids) t.accumulate(id, g);
                                  });
}

Var weighted_sum(Var x, const Tensor& weights) {
  require(weights.size() == x.value().size(), ErrorCode::kShapeMismatch,
          [&] { return "weighted_sum: weights " + shape_str(weights.shape()) +
              " do not match " + shape_str(x.value().shape()); });
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * x.value()[i];
  const std::size_t ix = x.id;
  return tape_of(x).record(Tensor::scalar(s), {x},
                           [ix, weights](Tape& t, const Tensor& g) {
                             Tensor& gx = t.grad_slot(ix);
                             for (std::size_t i = 0; i < weights.size(); ++i)
                               gx[i] += g[0] * weights[i];
                           });
}

Var cross_entropy(Var logits, std::size_t label) {
  const Tensor& z = logits.value();
  require(label < z.size(), ErrorCode::kInvalidArgument,
          [&] { return "cross_entropy: label " + std::to_string(label) + " out of range for " +
              std::to_string(z.size()) + " classes"; });
  const Tensor p = trajattn::softmax_rows(z.reshaped({z.size()}), 1.0);
  const double loss = -std::log(std::max(p[label], 1e-300));
  const std::size_t iz = logits.id;
  return tape_of(logits).record(Tensor::scalar(loss), {logits},
                                [iz, label, p](Tape& t, const Tensor& g) {
                                  Tensor& gz = t.grad_slot(iz);
                                  for (std::size_t i = 0; i < p.size(); ++i)
                                    gz[i] += g[0] * (p[i] - (i == label ? 1.0 : 0.0));
                                });
}

}  // namespace ad

}  // namespace trajattn
