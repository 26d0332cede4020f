// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "model/model.hpp"

#include "approx/approx.hpp"
#include "core/error.hpp"

namespace trajattn {

VideoClip::VideoClip(Tensor f) : frames(std::move(f)) {
  require(frames.rank() == 4, ErrorCode::kShapeMismatch,
          [&] { return "video clip must be [T0, C, H, W], got " + shape_str(frames.shape()); });
}

InputGeometry VideoClip::geometry() const {
  return {frames.dim(0), frames.dim(2), frames.dim(3), frames.dim(1)};
}

// ---- parameters --------------------------------------------------------------

namespace {

std::string block_name(std::size_t layer, const char* leaf) {
  return "block" + std::to_string(layer) + "." + leaf;
}

enum class Init { kWeight, kOne, kZero };

struct Slot {
  std::string name;
  Shape shape;
  Init init;
};

std::vector<Slot> layout(const ModelConfig& config, const InputGeometry& input) {
  const GridDims dims = config.grid(input);
  const std::size_t d = config.embed_dim;
  const std::size_t patch_in = config.patch.volume() * input.channels;
  std::vector<Slot> s;
  s.push_back({"patch.w", {d, patch_in}, Init::kWeight});
  s.push_back({"patch.b", {d}, Init::kZero});
  if (config.pos_mode == PosMode::kSeparate) {
    s.push_back({"pos.space", {dims.S, d}, Init::kWeight});
    s.push_back({"pos.time", {dims.T, d}, Init::kWeight});
  } else {
    s.push_back({"pos.st", {dims.tokens(), d}, Init::kWeight});
  }
  s.push_back({"cls", {1, d}, Init::kZero});
  for (std::size_t l = 0; l < config.layers; ++l) {
    auto add = [&](const char* leaf, Shape shape, Init init) {
      s.push_back({block_name(l, leaf), std::move(shape), init});
    };
    if (config.attention == AttentionKind::kDivided) {
      add("time.ln.g", {d}, Init::kOne);
      add("time.ln.b", {d}, Init::kZero);
      add("time.wq", {d, d}, Init::kWeight);
      add("time.wk", {d, d}, Init::kWeight);
      add("time.wv", {d, d}, Init::kWeight);
      add("time.wo", {d, d}, Init::kWeight);
      add("time.bo", {d}, Init::kZero);
    }
    add("ln1.g", {d}, Init::kOne);
    add("ln1.b", {d}, Init::kZero);
    add("attn.wq", {d, d}, Init::kWeight);
    add("attn.wk", {d, d}, Init::kWeight);
    add("attn.wv", {d, d}, Init::kWeight);
    if (config.uses_stage2_projections()) {
      add("attn.wq2", {d, d}, Init::kWeight);
      add("attn.wk2", {d, d}, Init::kWeight);
      add("attn.wv2", {d, d}, Init::kWeight);
    }
    add("attn.wo", {d, d}, Init::kWeight);
    add("attn.bo", {d}, Init::kZero);
    add("ln2.g", {d}, Init::kOne);
    add("ln2.b", {d}, Init::kZero);
    add("mlp.w1", {4 * d, d}, Init::kWeight);
    add("mlp.b1", {4 * d}, Init::kZero);
    add("mlp.w2", {d, 4 * d}, Init::kWeight);
    add("mlp.b2", {d}, Init::kZero);
  }
  s.push_back({"head.ln.g", {d}, Init::kOne});
  s.push_back({"head.ln.b", {d}, Init::kZero});
  s.push_back({"head.w", {config.classes, d}, Init::kWeight});
  s.push_back({"head.b", {config.classes}, Init::kZero});
  return s;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, const InputGeometry& input, Rng& rng,
                              double weight_std) {
  ModelParams p;
  for (Slot& slot : layout(config, input)) {
    Tensor t(slot.shape);
    if (slot.init == Init::kOne) {
      t = Tensor::full(slot.shape, 1.0);
    } else if (slot.init == Init::kWeight) {
      for (double& v : t.data()) v = weight_std * rng.truncated_normal();
    }
    p.add(std::move(slot.name), std::move(t));
  }
  return p;
}

ModelParams ModelParams::zeros(const ModelConfig& config, const InputGeometry& input) {
  ModelParams p;
  for (Slot& slot : layout(config, input)) p.add(std::move(slot.name), Tensor(slot.shape));
  return p;
}

std::size_t ModelParams::numel() const noexcept {
  std::size_t n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

std::size_t ModelParams::index(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), ErrorCode::kInvalidArgument,
          [&] { return "no parameter named '" + name + "'"; });
  return it->second;
}

void ModelParams::add(std::string name, Tensor value) {
  require(!has(name), ErrorCode::kInvalidArgument, [&] { return "duplicate parameter '" + name + "'"; });
  index_.emplace(name, values_.size());
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

BoundParams::BoundParams(const ModelParams& params, std::vector<Var> vars)
    : params_(&params), vars_(std::move(vars)) {
  require(vars_.size() == params.count(), ErrorCode::kInvalidArgument,
          "bound parameter count does not match the model");
}

BoundParams BoundParams::bind(Tape& tape, const ModelParams& params, bool trainable) {
  std::vector<Var> vars;
  vars.reserve(params.count());
  for (const Tensor& t : params.values())
    vars.push_back(trainable ? tape.leaf(t) : tape.constant(t));
  return BoundParams(params, std::move(vars));
}

// ---- tokenization --------------------------------------------------------------

Tensor extract_patches(const VideoClip& clip, PatchSize patch) {
  const InputGeometry g = clip.geometry();
  ModelConfig probe;
  probe.patch = patch;
  probe.embed_dim = probe.heads = 1;
  const GridDims dims = probe.grid(g);
  const std::size_t gw = g.width / patch.w;
  const std::size_t width = patch.volume() * g.channels;
  Tensor out({dims.tokens(), width});
  const Tensor& f = clip.frames;
  const std::size_t plane = g.height * g.width;
  for (std::size_t t = 0; t < dims.T; ++t) {
    for (std::size_t s = 0; s < dims.S; ++s) {
      const std::size_t y0 = (s / gw) * patch.h;
      const std::size_t x0 = (s % gw) * patch.w;
      auto row = out.row(dims.index(s, t));
      std::size_t col = 0;
      for (std::size_t dt = 0; dt < patch.t; ++dt) {
        const std::size_t frame = t * patch.t + dt;
        for (std::size_t c = 0; c < g.channels; ++c) {
          const std::size_t base = (frame * g.channels + c) * plane;
          for (std::size_t dy = 0; dy < patch.h; ++dy)
            for (std::size_t dx = 0; dx < patch.w; ++dx)
              row[col++] = f[base + (y0 + dy) * g.width + x0 + dx];
        }
      }
    }
  }
  return out;
}

TokenGrid tokenize(const VideoClip& clip, const ModelConfig& config, const ModelParams& params) {
  const GridDims dims = config.grid(clip.geometry());
  const Tensor patches = extract_patches(clip, config.patch);
  const Tensor& w = params.at("patch.w");
  require(w.cols() == patches.cols(), ErrorCode::kShapeMismatch,
          [&] { return "patch projection expects " + std::to_string(w.cols()) + " inputs, clip gives " +
              std::to_string(patches.cols()); });
  Tensor x = matmul_nt(patches, w);
  const Tensor& b = params.at("patch.b");
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
  }
  return TokenGrid(std::move(x), dims);
}

Tensor add_positional(const Tensor& tokens, GridDims dims, const ModelParams& params,
                      PosMode mode) {
  require(tokens.rank() == 2 && tokens.rows() == dims.tokens(), ErrorCode::kShapeMismatch, [&] {
    return "add_positional: tokens " + shape_str(tokens.shape()) + " do not hold S*T rows";
  });
  Tensor out = tokens;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    if (mode == PosMode::kSeparate) {
      auto es = params.at("pos.space").row(dims.location_of(i));
      auto et = params.at("pos.time").row(dims.frame_of(i));
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += es[j] + et[j];
    } else {
      auto e = params.at("pos.st").row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += e[j];
    }
  }
  return out;
}

std::size_t positional_parameter_count(GridDims dims, std::size_t d, PosMode mode) {
  return mode == PosMode::kSeparate ? (dims.S + dims.T) * d : dims.tokens() * d;
}

// ---- tape forward ----------------------------------------------------------------

namespace {

Var linear(Var x, Var w, Var b) { return ad::add_row(ad::matmul_nt(x, w), b); }

Var head_cols(Var x, std::size_t h, std::size_t dh) { return ad::cols_slice(x, h * dh, dh); }

Var tokens_of(Var x, std::size_t n) { return ad::rows_slice(x, 1, n); }

std::vector<Var> head_slices(std::span<const Var> xs, std::size_t h, std::size_t dh) {
  std::vector<Var> out;
  out.reserve(xs.size());
  for (const Var& x : xs) out.push_back(head_cols(x, h, dh));
  return out;
}

// Multi-head temporal pooling over concatenated trajectory tokens.
Var trajectory_pooling(const attn::Stage1& joined, const BoundParams& p, std::size_t layer,
                       const ModelConfig& config, double scale) {
  if (config.temporal == TemporalMode::kAverage) return attn::temporal_average(joined.per_frame);
  const Var q2 = ad::matmul_nt(attn::diagonal_tokens(joined), p[block_name(layer, "attn.wq2")]);
  std::vector<Var> k2, v2;
  for (const Var& y : joined.per_frame) {
    k2.push_back(ad::matmul_nt(y, p[block_name(layer, "attn.wk2")]));
    v2.push_back(ad::matmul_nt(y, p[block_name(layer, "attn.wv2")]));
  }
  const std::size_t dh = config.head_width();
  std::vector<Var> heads;
  for (std::size_t h = 0; h < config.heads; ++h) {
    heads.push_back(attn::temporal_attention(head_cols(q2, h, dh), head_slices(k2, h, dh),
                                             head_slices(v2, h, dh), scale));
  }
  return ad::concat_cols(heads);
}

}  // namespace

Var attention_heads(Var x, const BoundParams& p, std::size_t layer, const BlockContext& ctx) {
  const ModelConfig& config = ctx.config;
  const GridDims dims = ctx.dims;
  const std::size_t n = dims.tokens();
  require(x.value().rank() == 2 && x.value().rows() == n + 1 &&
              x.value().cols() == config.embed_dim,
          ErrorCode::kShapeMismatch,
          [&] { return "attention input " + shape_str(x.shape()) + " does not match the token grid"; });
  const std::size_t dh = config.head_width();
  const double scale = default_scale(dh);

  const Var q = ad::matmul_nt(x, p[block_name(layer, "attn.wq")]);
  const Var k = ad::matmul_nt(x, p[block_name(layer, "attn.wk")]);
  const Var v = ad::matmul_nt(x, p[block_name(layer, "attn.wv")]);

  std::vector<Var> token_heads, cls_heads;
  std::vector<attn::Stage1> stages;
  for (std::size_t h = 0; h < config.heads; ++h) {
    const Var qh = head_cols(q, h, dh), kh = head_cols(k, h, dh), vh = head_cols(v, h, dh);
    const Var qt = tokens_of(qh, n), kt = tokens_of(kh, n), vt = tokens_of(vh, n);
    cls_heads.push_back(attn::cls(ad::rows_slice(qh, 0, 1), kh, vh, scale));
    switch (config.attention) {
      case AttentionKind::kJoint:
        token_heads.push_back(attn::joint(qt, kt, vt, scale));
        break;
      case AttentionKind::kDivided:
        token_heads.push_back(attn::divided_space(qt, kt, vt, dims, scale));
        break;
      case AttentionKind::kTrajectory:
        stages.push_back(attn::trajectory_stage1(qt, kt, vt, dims, scale, config.norm));
        break;
      case AttentionKind::kTrajectoryApprox: {
        Rng rng = Rng(config.approx.seed).fork(layer * config.heads + h);
        stages.push_back(
            attn::approx_trajectory_stage1(qt, kt, vt, dims, config.approx, scale, rng));
        break;
      }
    }
  }

  Var tokens_out;
  if (!stages.empty()) {
    if (ctx.trace) {
      if (ctx.trace->maps.size() <= layer) ctx.trace->maps.resize(layer + 1);
      for (const attn::Stage1& st : stages)
        if (!st.maps.empty()) ctx.trace->maps[layer].push_back(to_intermediate(st).maps);
    }
    attn::Stage1 joined;
    joined.dims = dims;
    for (std::size_t tp = 0; tp < dims.T; ++tp) {
      std::vector<Var> parts;
      for (const attn::Stage1& st : stages) parts.push_back(st.per_frame[tp]);
      joined.per_frame.push_back(ad::concat_cols(parts));
    }
    tokens_out = trajectory_pooling(joined, p, layer, config, scale);
  } else {
    tokens_out = ad::concat_cols(token_heads);
  }
  return ad::concat_rows(std::vector<Var>{ad::concat_cols(cls_heads), tokens_out});
}

Var multi_head(Var x, const BoundParams& p, std::size_t layer, const BlockContext& ctx) {
  return linear(attention_heads(x, p, layer, ctx), p[block_name(layer, "attn.wo")],
                p[block_name(layer, "attn.bo")]);
}

namespace {

// Temporal sublayer of the divided kind: tokens attend along their own
// spatial index; the cls row passes through unchanged.
Var divided_time_sublayer(Var z, const BoundParams& p, std::size_t layer,
                          const BlockContext& ctx) {
  const ModelConfig& config = ctx.config;
  const std::size_t n = ctx.dims.tokens();
  const std::size_t dh = config.head_width();
  const double scale = default_scale(dh);
  const Var x = ad::layer_norm(tokens_of(z, n), p[block_name(layer, "time.ln.g")],
                               p[block_name(layer, "time.ln.b")]);
  const Var q = ad::matmul_nt(x, p[block_name(layer, "time.wq")]);
  const Var k = ad::matmul_nt(x, p[block_name(layer, "time.wk")]);
  const Var v = ad::matmul_nt(x, p[block_name(layer, "time.wv")]);
  std::vector<Var> heads;
  for (std::size_t h = 0; h < config.heads; ++h)
    heads.push_back(attn::divided_time(head_cols(q, h, dh), head_cols(k, h, dh),
                                       head_cols(v, h, dh), ctx.dims, scale));
  const Var out = linear(ad::concat_cols(heads), p[block_name(layer, "time.wo")],
                         p[block_name(layer, "time.bo")]);
  const Var zero_cls = z.tape->constant(Tensor({1, config.embed_dim}));
  return ad::add(z, ad::concat_rows(std::vector<Var>{zero_cls, out}));
}

}  // namespace

Var block_forward(Var z, const BoundParams& p, std::size_t layer, const BlockContext& ctx) {
  if (ctx.config.attention == AttentionKind::kDivided)
    z = divided_time_sublayer(z, p, layer, ctx);
  const Var a = ad::layer_norm(z, p[block_name(layer, "ln1.g")], p[block_name(layer, "ln1.b")]);
  const Var y = ad::add(multi_head(a, p, layer, ctx), z);
  const Var b = ad::layer_norm(y, p[block_name(layer, "ln2.g")], p[block_name(layer, "ln2.b")]);
  const Var hidden = ad::gelu(linear(b, p[block_name(layer, "mlp.w1")], p[block_name(layer, "mlp.b1")]));
  return ad::add(linear(hidden, p[block_name(layer, "mlp.w2")], p[block_name(layer, "mlp.b2")]), y);
}

Var embed(Tape& tape, const Tensor& patches, const BoundParams& p, const ModelConfig& config,
          GridDims dims) {
  require(patches.rank() == 2 && patches.rows() == dims.tokens(), ErrorCode::kShapeMismatch,
          [&] { return "patches " + shape_str(patches.shape()) + " do not hold S*T rows"; });
  Var x = linear(tape.constant(patches), p["patch.w"], p["patch.b"]);
  if (config.pos_mode == PosMode::kSeparate) {
    std::vector<std::size_t> loc(dims.tokens()), frame(dims.tokens());
    for (std::size_t i = 0; i < dims.tokens(); ++i) {
      loc[i] = dims.location_of(i);
      frame[i] = dims.frame_of(i);
    }
    x = ad::add(x, ad::add(ad::gather_rows(p["pos.space"], std::move(loc)),
                           ad::gather_rows(p["pos.time"], std::move(frame))));
  } else {
    x = ad::add(x, p["pos.st"]);
  }
  return ad::concat_rows(std::vector<Var>{p["cls"], x});
}

Var forward(Tape& tape, const Tensor& patches, const BoundParams& p, const ModelConfig& config,
            GridDims dims, ForwardTrace* trace) {
  Var z = embed(tape, patches, p, config, dims);
  const BlockContext ctx{config, dims, trace};
  for (std::size_t l = 0; l < config.layers; ++l) z = block_forward(z, p, l, ctx);
  const Var cls = ad::layer_norm(ad::rows_slice(z, 0, 1), p["head.ln.g"], p["head.ln.b"]);
  return linear(cls, p["head.w"], p["head.b"]);
}

// ---- value forward -----------------------------------------------------------------

Tensor forward(const VideoClip& clip, const ModelParams& params, const ModelConfig& config,
               ForwardTrace* trace) {
  const GridDims dims = config.grid(clip.geometry());
  Tape tape;
  const BoundParams p = BoundParams::bind(tape, params, false);
  const Tensor logits =
      forward(tape, extract_patches(clip, config.patch), p, config, dims, trace).value();
  return logits.reshaped({config.classes});
}

Tensor block_forward(const Tensor& z, const ModelParams& params, std::size_t layer,
                     const ModelConfig& config, GridDims dims) {
  Tape tape;
  const BoundParams p = BoundParams::bind(tape, params, false);
  return block_forward(tape.constant(z), p, layer, {config, dims}).value();
}

Tensor multi_head(const Tensor& x, const ModelParams& params, std::size_t layer,
                  const ModelConfig& config, GridDims dims) {
  Tape tape;
  const BoundParams p = BoundParams::bind(tape, params, false);
  return multi_head(tape.constant(x), p, layer, {config, dims}).value();
}

}  // namespace trajattn
