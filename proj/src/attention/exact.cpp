// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "attention/exact.hpp"

#include <cstdio>
#include <ostream>

#include "core/error.hpp"

namespace trajattn {

namespace {

void require_qkv(const Tensor& q, const Tensor& k, const Tensor& v) {
  require(q.rank() == 2 && k.rank() == 2 && v.rank() == 2,
          ErrorCode::kShapeMismatch, "attention operands must be matrices");
  require(q.cols() == k.cols() && k.rows() == v.rows(), ErrorCode::kShapeMismatch,
          [&] { return "attention shapes disagree: q " + shape_str(q.shape()) + ", k " +
              shape_str(k.shape()) + ", v " + shape_str(v.shape()); });
}

void require_grid(const Tensor& x, GridDims dims, const char* what) {
  require(x.rank() == 2 && x.rows() == dims.tokens(), ErrorCode::kShapeMismatch,
          [&] { return std::string(what) + ": expected " + std::to_string(dims.tokens()) +
              " token rows for S=" + std::to_string(dims.S) + ", T=" +
              std::to_string(dims.T) + ", got " + shape_str(x.shape()); });
}

// Spatial-major order: position s * T + t holds frame-major token t * S + s.
std::vector<std::size_t> space_major_order(GridDims dims) {
  std::vector<std::size_t> order(dims.tokens());
  for (std::size_t s = 0; s < dims.S; ++s)
    for (std::size_t t = 0; t < dims.T; ++t) order[s * dims.T + t] = dims.index(s, t);
  return order;
}

}  // namespace

TokenGrid::TokenGrid(Tensor tokens_in, GridDims dims_in, std::optional<Tensor> cls_in)
    : tokens(std::move(tokens_in)), dims(dims_in), cls(std::move(cls_in)) {
  require(dims.S > 0 && dims.T > 0, ErrorCode::kShapeMismatch,
          "grid extents must be positive");
  require_grid(tokens, dims, "TokenGrid");
  if (cls) {
    require(cls->size() == tokens.cols(), ErrorCode::kShapeMismatch,
            [&] { return "cls token width " + std::to_string(cls->size()) +
                " does not match token width " + std::to_string(tokens.cols()); });
  }
}

QkvProjections QkvProjections::identity(std::size_t d) {
  const Tensor eye = Tensor::identity(d);
  return {eye, eye, eye, eye, eye, eye};
}

void QkvProjections::validate(std::size_t d) const {
  for (const Tensor* w : {&wq, &wk, &wv, &wq2, &wk2, &wv2}) {
    require(w->shape() == Shape{d, d}, ErrorCode::kShapeMismatch,
            [&] { return "projection " + shape_str(w->shape()) + " is not " + std::to_string(d) +
                "x" + std::to_string(d); });
  }
}

double AttentionConfig::scale_for(std::size_t width) const {
  require(heads > 0 && width % heads == 0, ErrorCode::kConfig,
          [&] { return "width " + std::to_string(width) + " is not divisible by " +
              std::to_string(heads) + " heads"; });
  return scale.value_or(default_scale(width / heads));
}

namespace attn {

Var joint(Var q, Var k, Var v, double scale) {
  require_qkv(q.value(), k.value(), v.value());
  Tape& tape = *q.tape;
  const std::uint64_t n = q.value().rows() * k.value().rows();
  tape.probe().note(AllocKind::kAttentionMatrix, 2 * n);
  Var weights = ad::softmax_rows(ad::matmul_nt(q, k), scale);
  return ad::matmul(weights, v);
}

Var divided_space(Var q, Var k, Var v, GridDims dims, double scale) {
  require_grid(q.value(), dims, "divided_space q");
  require_grid(k.value(), dims, "divided_space k");
  require_grid(v.value(), dims, "divided_space v");
  std::vector<Var> frames;
  frames.reserve(dims.T);
  for (std::size_t t = 0; t < dims.T; ++t) {
    const std::size_t b = t * dims.S;
    frames.push_back(joint(ad::rows_slice(q, b, dims.S), ad::rows_slice(k, b, dims.S),
                           ad::rows_slice(v, b, dims.S), scale));
  }
  return ad::concat_rows(frames);
}

Var divided_time(Var q, Var k, Var v, GridDims dims, double scale) {
  require_grid(q.value(), dims, "divided_time q");
  require_grid(k.value(), dims, "divided_time k");
  require_grid(v.value(), dims, "divided_time v");
  const auto order = space_major_order(dims);
  Var qs = ad::gather_rows(q, order);
  Var ks = ad::gather_rows(k, order);
  Var vs = ad::gather_rows(v, order);
  std::vector<Var> tubes;
  tubes.reserve(dims.S);
  for (std::size_t s = 0; s < dims.S; ++s) {
    const std::size_t b = s * dims.T;
    tubes.push_back(joint(ad::rows_slice(qs, b, dims.T), ad::rows_slice(ks, b, dims.T),
                          ad::rows_slice(vs, b, dims.T), scale));
  }
  std::vector<std::size_t> inverse(order.size());
  for (std::size_t j = 0; j < order.size(); ++j) inverse[order[j]] = j;
  return ad::gather_rows(ad::concat_rows(tubes), inverse);
}

Stage1 trajectory_stage1(Var q, Var k, Var v, GridDims dims, double scale, NormMode norm) {
  require_grid(q.value(), dims, "trajectory_stage1 q");
  require_grid(k.value(), dims, "trajectory_stage1 k");
  require_grid(v.value(), dims, "trajectory_stage1 v");
  require(q.value().cols() == k.value().cols(), ErrorCode::kShapeMismatch,
          "trajectory_stage1: q/k widths differ");
  Tape& tape = *q.tape;
  const std::size_t n = dims.tokens();
  Stage1 out;
  out.dims = dims;
  out.per_frame.reserve(dims.T);
  out.maps.reserve(dims.T);
  if (norm == NormMode::kSpatialPerFrame) {
    for (std::size_t tp = 0; tp < dims.T; ++tp) {
      const std::size_t b = tp * dims.S;
      tape.probe().note(AllocKind::kAttentionMatrix, 2 * n * dims.S);
      Var w = ad::softmax_rows(ad::matmul_nt(q, ad::rows_slice(k, b, dims.S)), scale);
      out.maps.push_back(w);
      out.per_frame.push_back(ad::matmul(w, ad::rows_slice(v, b, dims.S)));
    }
  } else {
    tape.probe().note(AllocKind::kAttentionMatrix, 2 * n * n);
    Var w = ad::softmax_rows(ad::matmul_nt(q, k), scale);
    for (std::size_t tp = 0; tp < dims.T; ++tp) {
      const std::size_t b = tp * dims.S;
      Var wt = ad::cols_slice(w, b, dims.S);
      out.maps.push_back(wt);
      out.per_frame.push_back(ad::matmul(wt, ad::rows_slice(v, b, dims.S)));
    }
  }
  return out;
}

Var diagonal_tokens(const Stage1& stage1) {
  const GridDims dims = stage1.dims;
  std::vector<Var> blocks;
  blocks.reserve(dims.T);
  for (std::size_t t = 0; t < dims.T; ++t)
    blocks.push_back(ad::rows_slice(stage1.per_frame[t], t * dims.S, dims.S));
  return ad::concat_rows(blocks);
}

Var temporal_attention(Var q2, std::span<const Var> k2, std::span<const Var> v2,
                       double scale) {
  require(!k2.empty() && k2.size() == v2.size(), ErrorCode::kShapeMismatch,
          "temporal_attention needs one key and value per frame");
  std::vector<Var> scores;
  scores.reserve(k2.size());
  for (const Var& k : k2) scores.push_back(ad::rowdot(q2, k));
  const std::size_t n = q2.value().rows();
  q2.tape->probe().note(AllocKind::kAttentionMatrix, 2 * n * k2.size());
  Var w = ad::softmax_rows(ad::concat_cols(scores), scale);
  std::vector<Var> terms;
  terms.reserve(v2.size());
  for (std::size_t tp = 0; tp < v2.size(); ++tp)
    terms.push_back(ad::mul_rows(v2[tp], ad::cols_slice(w, tp, 1)));
  return ad::add_n(terms);
}

Var temporal_average(std::span<const Var> per_frame) {
  return ad::scale(ad::add_n(per_frame), 1.0 / static_cast<double>(per_frame.size()));
}

Var trajectory_stage2(const Stage1& stage1, Var wq2, Var wk2, Var wv2, double scale,
                      TemporalMode temporal) {
  if (temporal == TemporalMode::kAverage) return temporal_average(stage1.per_frame);
  Var q2 = ad::matmul_nt(diagonal_tokens(stage1), wq2);
  std::vector<Var> k2, v2;
  k2.reserve(stage1.per_frame.size());
  v2.reserve(stage1.per_frame.size());
  for (const Var& y : stage1.per_frame) {
    k2.push_back(ad::matmul_nt(y, wk2));
    v2.push_back(ad::matmul_nt(y, wv2));
  }
  return temporal_attention(q2, k2, v2, scale);
}

Var cls(Var q_cls, Var k_all, Var v_all, double scale) {
  return joint(q_cls, k_all, v_all, scale);
}

}  // namespace attn

TrajectoryIntermediate to_intermediate(const attn::Stage1& stage1) {
  const GridDims dims = stage1.dims;
  const std::size_t n = dims.tokens();
  const std::size_t d = stage1.per_frame.front().value().cols();
  TrajectoryIntermediate inter{Tensor({n, dims.T, dims.S}), Tensor({n, dims.T, d}), dims};
  for (std::size_t tp = 0; tp < dims.T; ++tp) {
    const Tensor& m = stage1.maps[tp].value();
    const Tensor& y = stage1.per_frame[tp].value();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < dims.S; ++s)
        inter.maps[(i * dims.T + tp) * dims.S + s] = m.at(i, s);
      for (std::size_t j = 0; j < d; ++j)
        inter.tokens[(i * dims.T + tp) * d + j] = y.at(i, j);
    }
  }
  return inter;
}

Tensor joint_attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale) {
  Tape tape;
  return attn::joint(tape.constant(q), tape.constant(k), tape.constant(v), scale).value();
}

Tensor divided_space_attention(GridDims dims, const Tensor& q, const Tensor& k,
                               const Tensor& v, double scale) {
  Tape tape;
  return attn::divided_space(tape.constant(q), tape.constant(k), tape.constant(v), dims,
                             scale)
      .value();
}

Tensor divided_time_attention(GridDims dims, const Tensor& q, const Tensor& k,
                              const Tensor& v, double scale) {
  Tape tape;
  return attn::divided_time(tape.constant(q), tape.constant(k), tape.constant(v), dims,
                            scale)
      .value();
}

TrajectoryIntermediate trajectory_stage1(GridDims dims, const Tensor& q, const Tensor& k,
                                         const Tensor& v, double scale, NormMode norm) {
  Tape tape;
  return to_intermediate(attn::trajectory_stage1(tape.constant(q), tape.constant(k),
                                                 tape.constant(v), dims, scale, norm));
}

Tensor trajectory_stage2(const TrajectoryIntermediate& inter, const QkvProjections& proj,
                         double scale, TemporalMode temporal) {
  const GridDims dims = inter.dims;
  const std::size_t n = dims.tokens();
  require(inter.tokens.rank() == 3 && inter.tokens.dim(0) == n &&
              inter.tokens.dim(1) == dims.T,
          ErrorCode::kShapeMismatch,
          [&] { return "trajectory intermediate " + shape_str(inter.tokens.shape()) +
              " does not match S=" + std::to_string(dims.S) +
              ", T=" + std::to_string(dims.T); });
  const std::size_t d = inter.tokens.dim(2);
  if (temporal == TemporalMode::kAttention) proj.validate(d);
  Tape tape;
  attn::Stage1 stage1;
  stage1.dims = dims;
  for (std::size_t tp = 0; tp < dims.T; ++tp) {
    Tensor y({n, d});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) y.at(i, j) = inter.tokens[(i * dims.T + tp) * d + j];
    stage1.per_frame.push_back(tape.constant(std::move(y)));
  }
  return attn::trajectory_stage2(stage1, tape.constant(proj.wq2), tape.constant(proj.wk2),
                                 tape.constant(proj.wv2), scale, temporal)
      .value();
}

Tensor trajectory_attention(const TokenGrid& grid, const QkvProjections& proj,
                            const AttentionConfig& config) {
  const std::size_t d = grid.width();
  proj.validate(d);
  const double scale = config.scale.value_or(default_scale(d));
  Tape tape;
  Var z = tape.constant(grid.tokens);
  Var q = ad::matmul_nt(z, tape.constant(proj.wq));
  Var k = ad::matmul_nt(z, tape.constant(proj.wk));
  Var v = ad::matmul_nt(z, tape.constant(proj.wv));
  auto stage1 = attn::trajectory_stage1(q, k, v, grid.dims, scale, config.norm);
  return attn::trajectory_stage2(stage1, tape.constant(proj.wq2), tape.constant(proj.wk2),
                                 tape.constant(proj.wv2), scale, config.temporal)
      .value();
}

Tensor cls_attention(const Tensor& q_cls, const Tensor& k_tokens, const Tensor& v_tokens,
                     const Tensor& k_cls, const Tensor& v_cls, double scale) {
  const std::size_t d = k_tokens.cols();
  Tape tape;
  const Tensor kc = k_cls.reshaped({1, k_cls.size()});
  const Tensor vc = v_cls.reshaped({1, v_cls.size()});
  const Tensor k_all = concat_rows(std::vector<Tensor>{k_tokens, kc});
  const Tensor v_all = concat_rows(std::vector<Tensor>{v_tokens, vc});
  require(q_cls.size() == d, ErrorCode::kShapeMismatch, "cls query width mismatch");
  return attn::cls(tape.constant(q_cls.reshaped({1, d})), tape.constant(k_all),
                   tape.constant(v_all), scale)
      .value()
      .reshaped({v_all.cols()});
}

void write_attention_csv(std::ostream& os, const TrajectoryIntermediate& inter) {
  const GridDims dims = inter.dims;
  os << "s,t,t_prime,s_prime,weight\n";
  char buf[64];
  for (std::size_t t = 0; t < dims.T; ++t) {
    for (std::size_t s = 0; s < dims.S; ++s) {
      const std::size_t i = dims.index(s, t);
      for (std::size_t tp = 0; tp < dims.T; ++tp) {
        for (std::size_t sp = 0; sp < dims.S; ++sp) {
          std::snprintf(buf, sizeof buf, "%.17g",
                        inter.maps[(i * dims.T + tp) * dims.S + sp]);
          os << s << ',' << t << ',' << tp << ',' << sp << ',' << buf << '\n';
        }
      }
    }
  }
}

}  // namespace trajattn
