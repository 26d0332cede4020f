// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "approx/approx.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace trajattn {

namespace attn {

Orthoformer orthoformer(Var q, Var k, Var v, Var P, double scale) {
  const Tensor& pv = P.value();
  require(q.value().cols() == pv.cols() && k.value().cols() == pv.cols() &&
              k.value().rows() == v.value().rows(),
          ErrorCode::kShapeMismatch,
          [&] { return "orthoformer shapes disagree: q " + shape_str(q.shape()) + ", k " +
              shape_str(k.shape()) + ", v " + shape_str(v.shape()) + ", P " +
              shape_str(pv.shape()); });
  Tape& tape = *q.tape;
  const std::uint64_t r = pv.rows();
  tape.probe().note(AllocKind::kAttentionMatrix,
                    2 * q.value().rows() * r + 2 * r * k.value().rows());
  Var omega1 = ad::softmax_rows(ad::matmul_nt(q, P), scale);
  Var omega2 = ad::softmax_rows(ad::matmul_nt(P, k), scale);
  return {ad::matmul(omega1, ad::matmul(omega2, v)), omega1, omega2};
}

Var prototype_rows(Var stacked, const PrototypeSet& set) {
  if (set.strategy == PrototypeStrategy::kSegmentMeans) {
    const Tensor m = segment_mean_matrix(stacked.value().rows(), set.R());
    return ad::matmul(stacked.tape->constant(m), stacked);
  }
  return ad::gather_rows(stacked, set.indices);
}

Stage1 approx_trajectory_stage1(Var q, Var k, Var v, GridDims dims,
                                const PrototypeOptions& opts, double scale, Rng& rng,
                                std::vector<PrototypeSet>* sets) {
  require(q.value().rows() == dims.tokens() && k.value().rows() == dims.tokens() &&
              v.value().rows() == dims.tokens(),
          ErrorCode::kShapeMismatch,
          [&] { return "approx_trajectory_stage1: operands do not hold S*T = " +
              std::to_string(dims.tokens()) + " rows"; });
  Tape& tape = *q.tape;
  const std::size_t n = dims.tokens();
  Stage1 out;
  out.dims = dims;
  out.per_frame.reserve(dims.T);

  if (opts.shared_across_time) {
    PrototypeSet set = select_prototypes(q.value(), k.value(), opts, rng, &tape.probe());
    const Var stacked = ad::concat_rows(std::vector<Var>{q, k});
    const Var P = prototype_rows(stacked, set);
    const std::uint64_t r = set.R();
    tape.probe().note(AllocKind::kAttentionMatrix, 2 * n * r);
    const Var omega1 = ad::softmax_rows(ad::matmul_nt(q, P), scale);
    for (std::size_t tp = 0; tp < dims.T; ++tp) {
      const std::size_t b = tp * dims.S;
      tape.probe().note(AllocKind::kAttentionMatrix, 2 * r * dims.S);
      Var omega2 = ad::softmax_rows(ad::matmul_nt(P, ad::rows_slice(k, b, dims.S)), scale);
      out.per_frame.push_back(
          ad::matmul(omega1, ad::matmul(omega2, ad::rows_slice(v, b, dims.S))));
    }
    if (sets) sets->push_back(std::move(set));
    return out;
  }

  for (std::size_t tp = 0; tp < dims.T; ++tp) {
    const std::size_t b = tp * dims.S;
    Var kt = ad::rows_slice(k, b, dims.S);
    PrototypeSet set = select_prototypes(q.value(), kt.value(), opts, rng, &tape.probe());
    const Var P = prototype_rows(ad::concat_rows(std::vector<Var>{q, kt}), set);
    out.per_frame.push_back(orthoformer(q, kt, ad::rows_slice(v, b, dims.S), P, scale).output);
    if (sets) sets->push_back(std::move(set));
  }
  return out;
}

}  // namespace attn

ApproxAttentionResult orthoformer_attention(const Tensor& q, const Tensor& k,
                                            const Tensor& v, const Tensor& P, double scale) {
  Tape tape;
  auto r = attn::orthoformer(tape.constant(q), tape.constant(k), tape.constant(v),
                             tape.constant(P), scale);
  ApproxAttentionResult out;
  out.output = r.output.value();
  out.omega1 = r.omega1.value();
  out.omega2 = r.omega2.value();
  out.probe = tape.probe();
  return out;
}

Tensor iterative_pinv(const Tensor& a, std::size_t n_iter) {
  require(a.rank() == 2 && a.dim(0) == a.dim(1), ErrorCode::kShapeMismatch,
          [&] { return "iterative_pinv needs a square matrix, got " + shape_str(a.shape()); });
  require(n_iter >= 1, ErrorCode::kInvalidArgument, "iterative_pinv needs n_iter >= 1");
  const std::size_t r = a.dim(0);
  double max_row = 0.0, max_col = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      row += std::abs(a.at(i, j));
      col += std::abs(a.at(j, i));
    }
    max_row = std::max(max_row, row);
    max_col = std::max(max_col, col);
  }
  require(max_row > 0.0, ErrorCode::kNumeric, "iterative_pinv of a zero matrix");
  Tensor z = scaled(transpose(a), 1.0 / (max_row * max_col));

  const Tensor eye = Tensor::identity(r);
  auto shifted = [&](double c, const Tensor& m) {  // c I - m
    return sub(scaled(eye, c), m);
  };
  for (std::size_t it = 0; it < n_iter; ++it) {
    const Tensor az = matmul(a, z);
    Tensor inner = matmul(az, shifted(7.0, az));
    inner = matmul(az, shifted(15.0, inner));
    z = scaled(matmul(z, shifted(13.0, inner)), 0.25);
  }
  return z;
}

ApproxAttentionResult nystromformer_attention(const Tensor& q, const Tensor& k,
                                              const Tensor& v, const NystromConfig& config,
                                              double scale) {
  require(q.rank() == 2 && q.shape() == k.shape() && k.rows() == v.rows(),
          ErrorCode::kShapeMismatch,
          [&] { return "nystromformer shapes disagree: q " + shape_str(q.shape()) + ", k " +
              shape_str(k.shape()) + ", v " + shape_str(v.shape()); });
  require(config.R >= 1 && config.R <= q.rows(), ErrorCode::kInvalidArgument,
          [&] { return "nystromformer: R=" + std::to_string(config.R) + " must lie in [1, N=" +
              std::to_string(q.rows()) + "]"; });
  const auto [pq, pk] = segment_means(q, k, config.R);
  ApproxAttentionResult out;
  const std::uint64_t n = q.rows(), r = config.R;
  out.probe.note(AllocKind::kAttentionMatrix, 2 * n * r + 2 * r * r + 2 * r * n);
  out.probe.note(AllocKind::kPrototypeBuild, 2 * r * q.cols());
  out.omega1 = softmax_rows(matmul_nt(q, pk), scale);
  out.omega2 = softmax_rows(matmul_nt(pq, pk), scale);
  out.omega2_inv = iterative_pinv(out.omega2, config.n_iter);
  out.omega3 = softmax_rows(matmul_nt(pq, k), scale);
  out.output = matmul(out.omega1, matmul(out.omega2_inv, matmul(out.omega3, v)));
  return out;
}

ApproxStage1Result approx_trajectory_stage1(GridDims dims, const Tensor& q, const Tensor& k,
                                            const Tensor& v, const PrototypeOptions& opts,
                                            double scale) {
  Tape tape;
  Rng rng(opts.seed);
  ApproxStage1Result result;
  Var qv = tape.constant(q), kv = tape.constant(k), vv = tape.constant(v);
  attn::Stage1 stage1 =
      attn::approx_trajectory_stage1(qv, kv, vv, dims, opts, scale, rng, &result.prototypes);
  result.probe = tape.probe();

  // Implied per-frame maps omega1 omega2, for inspection only.
  for (std::size_t tp = 0; tp < dims.T; ++tp) {
    const PrototypeSet& set = opts.shared_across_time ? result.prototypes[0]
                                                      : result.prototypes[tp];
    const Tensor kt = rows_slice(k, tp * dims.S, dims.S);
    const Tensor om1 = softmax_rows(matmul_nt(q, set.P), scale);
    const Tensor om2 = softmax_rows(matmul_nt(set.P, kt), scale);
    stage1.maps.push_back(tape.constant(matmul(om1, om2)));
  }
  result.inter = to_intermediate(stage1);
  return result;
}

std::string to_string(AttentionMethod m) {
  switch (m) {
    case AttentionMethod::kExact: return "exact";
    case AttentionMethod::kOrthoformer: return "orthoformer";
    case AttentionMethod::kNystromformer: return "nystromformer";
  }
  return "unknown";
}

AttentionMethod parse_method(const std::string& name) {
  if (name == "exact") return AttentionMethod::kExact;
  if (name == "orthoformer") return AttentionMethod::kOrthoformer;
  if (name == "nystromformer" || name == "nystrom") return AttentionMethod::kNystromformer;
  fail(ErrorCode::kConfig, "unknown attention method '" + name + "'");
}

AllocationCounts allocation_probe(AttentionMethod method, std::size_t n, std::size_t d,
                                  std::size_t R, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor q = rng.normal_tensor({n, d});
  const Tensor k = rng.normal_tensor({n, d});
  const Tensor v = rng.normal_tensor({n, d});
  const double scale = default_scale(d);
  AllocationProbe probe;
  switch (method) {
    case AttentionMethod::kExact: {
      Tape tape;
      attn::joint(tape.constant(q), tape.constant(k), tape.constant(v), scale);
      probe = tape.probe();
      break;
    }
    case AttentionMethod::kOrthoformer: {
      AllocationProbe build;
      const PrototypeSet set = most_orthogonal_subset(q, k, R, c, rng, std::nullopt, &build);
      probe = orthoformer_attention(q, k, v, set.P, scale).probe;
      probe.note(AllocKind::kPrototypeBuild, build[AllocKind::kPrototypeBuild]);
      break;
    }
    case AttentionMethod::kNystromformer:
      probe = nystromformer_attention(q, k, v, {R, 6}, scale).probe;
      break;
  }
  return {probe[AllocKind::kAttentionMatrix], probe[AllocKind::kPrototypeBuild]};
}

}  // namespace trajattn
