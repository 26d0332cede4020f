// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "attention/exact.hpp"
#include "core/rng.hpp"
#include "core/tape.hpp"
#include "model/config.hpp"

namespace trajattn {

struct VideoClip {
  Tensor frames;  // [T0, C, H, W]

  explicit VideoClip(Tensor frames);
  InputGeometry geometry() const;
};

// Named parameter tensors in a fixed creation order. Weight matrices map
// rows: y = x W^T + b.
class ModelParams {
 public:
  // Truncated-normal (std 0.02 by default) projections and positional
  // tables, unit LN gains, zero biases and zero cls.
  static ModelParams init(const ModelConfig& config, const InputGeometry& input, Rng& rng,
                          double weight_std = 0.02);
  // Same layout with every entry zero (LN gains included).
  static ModelParams zeros(const ModelConfig& config, const InputGeometry& input);

  std::size_t count() const noexcept { return values_.size(); }
  std::size_t numel() const noexcept;
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index(const std::string& name) const;
  Tensor& at(const std::string& name) { return values_[index(name)]; }
  const Tensor& at(const std::string& name) const { return values_[index(name)]; }

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::vector<Tensor>& values() noexcept { return values_; }
  const std::vector<Tensor>& values() const noexcept { return values_; }

  void add(std::string name, Tensor value);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::map<std::string, std::size_t> index_;
};

// Parameters recorded on a tape, addressable by name.
class BoundParams {
 public:
  BoundParams(const ModelParams& params, std::vector<Var> vars);
  // Leaves when trainable, constants otherwise.
  static BoundParams bind(Tape& tape, const ModelParams& params, bool trainable);

  Var operator[](const std::string& name) const { return vars_[params_->index(name)]; }
  bool has(const std::string& name) const { return params_->has(name); }
  const std::vector<Var>& vars() const noexcept { return vars_; }

 private:
  const ModelParams* params_;
  std::vector<Var> vars_;
};

// Rows are tokens in frame-major order; each row flattens one
// t_p x h_p x w_p block in (dt, c, dy, dx) order.
Tensor extract_patches(const VideoClip& clip, PatchSize patch);

// Patch embedding without positional terms.
TokenGrid tokenize(const VideoClip& clip, const ModelConfig& config, const ModelParams& params);
Tensor add_positional(const Tensor& tokens, GridDims dims, const ModelParams& params,
                      PosMode mode);
std::size_t positional_parameter_count(GridDims dims, std::size_t d, PosMode mode);

// Stage-one spatial maps captured during a forward pass: maps[layer][head] is
// [S*T, T, S]. Empty for kinds without exact stage-one maps.
struct ForwardTrace {
  std::vector<std::vector<Tensor>> maps;
};

struct BlockContext {
  const ModelConfig& config;
  GridDims dims;
  ForwardTrace* trace = nullptr;
};

// ---- tape forward ----------------------------------------------------------

// x holds the cls row first, then S*T tokens; returns per-head outputs
// concatenated along columns, before the output projection.
Var attention_heads(Var x, const BoundParams& p, std::size_t layer, const BlockContext& ctx);
// attention_heads followed by the output projection.
Var multi_head(Var x, const BoundParams& p, std::size_t layer, const BlockContext& ctx);
// y = MHA(LN(z)) + z; z' = MLP(LN(y)) + y. The divided kind runs a temporal
// sublayer of the same residual form before the spatial one.
Var block_forward(Var z, const BoundParams& p, std::size_t layer, const BlockContext& ctx);
// Embedded tokens with cls prepended: [1 + S*T, D].
Var embed(Tape& tape, const Tensor& patches, const BoundParams& p, const ModelConfig& config,
          GridDims dims);
// Logits [1, classes].
Var forward(Tape& tape, const Tensor& patches, const BoundParams& p, const ModelConfig& config,
            GridDims dims, ForwardTrace* trace = nullptr);

// ---- value forward ---------------------------------------------------------

Tensor forward(const VideoClip& clip, const ModelParams& params, const ModelConfig& config,
               ForwardTrace* trace = nullptr);
Tensor block_forward(const Tensor& z, const ModelParams& params, std::size_t layer,
                     const ModelConfig& config, GridDims dims);
Tensor multi_head(const Tensor& x, const ModelParams& params, std::size_t layer,
                  const ModelConfig& config, GridDims dims);

}  // namespace trajattn
