// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "core/tape.hpp"
#include "core/tensor.hpp"

namespace trajattn {

// Spatial and temporal extent of a token field. Tokens are stored
// frame-major: flat index i = t * S + s.
struct GridDims {
  std::size_t S = 1;
  std::size_t T = 1;

  std::size_t tokens() const noexcept { return S * T; }
  std::size_t index(std::size_t s, std::size_t t) const noexcept { return t * S + s; }
  std::size_t frame_of(std::size_t i) const noexcept { return i / S; }
  std::size_t location_of(std::size_t i) const noexcept { return i % S; }
};

struct TokenGrid {
  Tensor tokens;  // [S*T, D]
  GridDims dims;
  std::optional<Tensor> cls;  // [D]

  TokenGrid(Tensor tokens, GridDims dims, std::optional<Tensor> cls = std::nullopt);
  std::size_t width() const { return tokens.cols(); }
};

// Projection matrices act on row vectors: q = z * Wq^T.
struct QkvProjections {
  Tensor wq, wk, wv;     // first stage, [D, D]
  Tensor wq2, wk2, wv2;  // trajectory pooling stage, [D, D]

  static QkvProjections identity(std::size_t d);
  void validate(std::size_t d) const;
};

enum class NormMode { kSpatialPerFrame, kSpaceTime };
enum class TemporalMode { kAttention, kAverage };

struct AttentionConfig {
  std::size_t heads = 1;
  std::optional<double> scale;  // default 1 / sqrt(D / heads)
  NormMode norm = NormMode::kSpatialPerFrame;
  TemporalMode temporal = TemporalMode::kAttention;

  double scale_for(std::size_t width) const;
};

inline double default_scale(std::size_t head_width) {
  return 1.0 / std::sqrt(static_cast<double>(head_width));
}

// Stage-one output: for every reference token i = (s, t) and frame t', the
// spatial attention weights over s' and the pooled trajectory token.
struct TrajectoryIntermediate {
  Tensor maps;    // [S*T, T, S]
  Tensor tokens;  // [S*T, T, D]
  GridDims dims;
};

// ---- Tensor-level reference kernels (single head) -------------------------

Tensor joint_attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale);
Tensor divided_space_attention(GridDims dims, const Tensor& q, const Tensor& k,
                               const Tensor& v, double scale);
Tensor divided_time_attention(GridDims dims, const Tensor& q, const Tensor& k,
                              const Tensor& v, double scale);
TrajectoryIntermediate trajectory_stage1(GridDims dims, const Tensor& q, const Tensor& k,
                                         const Tensor& v, double scale, NormMode norm);
Tensor trajectory_stage2(const TrajectoryIntermediate& inter, const QkvProjections& proj,
                         double scale, TemporalMode temporal);
// Projects the grid with proj.wq/wk/wv, then runs both stages. Single head;
// config.heads is consumed by the model's multi-head wrapper.
Tensor trajectory_attention(const TokenGrid& grid, const QkvProjections& proj,
                            const AttentionConfig& config);
// Output row for the cls token: its query attends over all grid tokens and
// itself. Grid tokens never attend to cls.
Tensor cls_attention(const Tensor& q_cls, const Tensor& k_tokens, const Tensor& v_tokens,
                     const Tensor& k_cls, const Tensor& v_cls, double scale);

// CSV with header "s,t,t_prime,s_prime,weight", one row per map entry.
void write_attention_csv(std::ostream& os, const TrajectoryIntermediate& inter);

// ---- tape kernels ------------------------------------------------------------
namespace attn {

Var joint(Var q, Var k, Var v, double scale);
Var divided_space(Var q, Var k, Var v, GridDims dims, double scale);
Var divided_time(Var q, Var k, Var v, GridDims dims, double scale);

struct Stage1 {
  std::vector<Var> per_frame;  // T entries of [S*T, D]: trajectory tokens at t'
  std::vector<Var> maps;       // T entries of [S*T, S]: weights over frame t'
  GridDims dims;
};

Stage1 trajectory_stage1(Var q, Var k, Var v, GridDims dims, double scale, NormMode norm);
// Rows y~_{s t t} gathered from the reference frame of every token.
Var diagonal_tokens(const Stage1& stage1);
// 1D attention over t' for each reference token; k2/v2 hold one entry per t'.
Var temporal_attention(Var q2, std::span<const Var> k2, std::span<const Var> v2,
                       double scale);
Var temporal_average(std::span<const Var> per_frame);
Var trajectory_stage2(const Stage1& stage1, Var wq2, Var wk2, Var wv2, double scale,
                      TemporalMode temporal);
Var cls(Var q_cls, Var k_all, Var v_all, double scale);

}  // namespace attn

// Converts tape stage-one values into the tensor form.
TrajectoryIntermediate to_intermediate(const attn::Stage1& stage1);

}  // namespace trajattn
