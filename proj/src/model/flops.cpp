// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "model/flops.hpp"

#include <algorithm>
#include <ostream>

namespace trajattn {

const char* to_string(FlopPart part) {
  switch (part) {
    case FlopPart::kPatchEmbed: return "patch_embed";
    case FlopPart::kQkvProj: return "qkv_proj";
    case FlopPart::kAttnScores: return "attn_scores";
    case FlopPart::kAttnValues: return "attn_values";
    case FlopPart::kStage2Proj: return "stage2_proj";
    case FlopPart::kOutProj: return "out_proj";
    case FlopPart::kMlp: return "mlp";
    case FlopPart::kHead: return "head";
  }
  return "unknown";
}

std::uint64_t FlopBreakdown::total() const {
  std::uint64_t t = 0;
  for (std::uint64_t m : macs) t += m;
  return t;
}

FlopBreakdown& FlopBreakdown::operator+=(const FlopBreakdown& other) {
  for (std::size_t i = 0; i < kFlopPartCount; ++i) macs[i] += other.macs[i];
  return *this;
}

namespace {

using u64 = std::uint64_t;

// Prototype attention for trajectory stage one.
void approx_stage1(FlopBreakdown& f, const ModelConfig& c, GridDims dims) {
  const u64 n = dims.tokens(), s = dims.S, t = dims.T, d = c.embed_dim;
  const bool shared = c.approx.shared_across_time;
  const u64 pool = shared ? 2 * n : n + s;
  const u64 cand = std::min<u64>(c.approx.c * c.approx.R, pool);
  const u64 r = std::min<u64>(c.approx.R, cand);
  const u64 builds = shared ? 1 : t;
  if (c.approx.strategy == PrototypeStrategy::kMostOrthogonal)
    f[FlopPart::kAttnScores] += builds * cand * r * d;  // greedy cosine updates
  f[FlopPart::kAttnScores] += (shared ? 1 : t) * n * r * d;  // q P^T
  f[FlopPart::kAttnScores] += t * r * s * d;                 // P k_t'^T
  f[FlopPart::kAttnValues] += t * r * s * d;                 // omega2 v
  f[FlopPart::kAttnValues] += t * n * r * d;                 // omega1 (omega2 v)
}

FlopBreakdown layer_flops(const ModelConfig& c, GridDims dims) {
  FlopBreakdown f;
  const u64 n_tok = dims.tokens();
  const u64 n = n_tok + 1;
  const u64 d = c.embed_dim;
  const u64 s = dims.S, t = dims.T;
  f[FlopPart::kQkvProj] = 3 * n * d * d;
  f[FlopPart::kOutProj] = n * d * d;
  f[FlopPart::kMlp] = 8 * n * d * d;
  // cls query over all tokens and itself.
  f[FlopPart::kAttnScores] = n * d;
  f[FlopPart::kAttnValues] = n * d;
  switch (c.attention) {
    case AttentionKind::kJoint:
      f[FlopPart::kAttnScores] += n_tok * n_tok * d;
      f[FlopPart::kAttnValues] += n_tok * n_tok * d;
      break;
    case AttentionKind::kDivided:
      f[FlopPart::kQkvProj] += 3 * n_tok * d * d;
      f[FlopPart::kOutProj] += n_tok * d * d;
      f[FlopPart::kAttnScores] += n_tok * t * d + n_tok * s * d;
      f[FlopPart::kAttnValues] += n_tok * t * d + n_tok * s * d;
      break;
    case AttentionKind::kTrajectory:
    case AttentionKind::kTrajectoryApprox:
      if (c.attention == AttentionKind::kTrajectory) {
        f[FlopPart::kAttnScores] += n_tok * n_tok * d;
        f[FlopPart::kAttnValues] += n_tok * n_tok * d;
      } else {
        approx_stage1(f, c, dims);
      }
      if (c.temporal == TemporalMode::kAttention) {
        // q from the diagonal trajectory token, k and v from all T of them.
        f[FlopPart::kStage2Proj] = n_tok * d * d + 2 * n_tok * t * d * d;
        f[FlopPart::kAttnScores] += n_tok * t * d;
        f[FlopPart::kAttnValues] += n_tok * t * d;
      }
      break;
  }
  return f;
}

}  // namespace

FlopReport flops_estimate(const ModelConfig& config, const InputGeometry& input) {
  const GridDims dims = config.grid(input);
  FlopReport r;
  r.config = config;
  r.input = input;
  r.stem[FlopPart::kPatchEmbed] =
      u64{dims.tokens()} * config.patch.volume() * input.channels * config.embed_dim;
  r.totals += r.stem;
  const FlopBreakdown layer = layer_flops(config, dims);
  r.per_layer.assign(config.layers, layer);
  for (const FlopBreakdown& l : r.per_layer) r.totals += l;
  r.head[FlopPart::kHead] = u64{config.embed_dim} * config.classes;
  r.totals += r.head;
  return r;
}

namespace {

nlohmann::json breakdown_json(const FlopBreakdown& b) {
  nlohmann::json j;
  for (std::size_t i = 0; i < kFlopPartCount; ++i)
    j[to_string(static_cast<FlopPart>(i))] = b.macs[i];
  j["total"] = b.total();
  return j;
}

}  // namespace

nlohmann::json to_json(const FlopReport& r) {
  nlohmann::json j;
  j["config"] = to_json(r.config);
  j["input"] = to_json(r.input);
  j["stem"] = breakdown_json(r.stem);
  j["per_layer"] = nlohmann::json::array();
  for (const FlopBreakdown& l : r.per_layer) j["per_layer"].push_back(breakdown_json(l));
  j["head"] = breakdown_json(r.head);
  j["totals"] = breakdown_json(r.totals);
  j["total_macs"] = r.total();
  j["gflops"] = r.gflops();
  j["views"] = "per clip; multi-view testing multiplies externally";
  return j;
}

void write_flops_csv(std::ostream& os, const FlopReport& r) {
  os << "scope,component,macs\n";
  auto emit = [&](const std::string& scope, const FlopBreakdown& b) {
    for (std::size_t i = 0; i < kFlopPartCount; ++i)
      if (b.macs[i] != 0)
        os << scope << ',' << to_string(static_cast<FlopPart>(i)) << ',' << b.macs[i] << '\n';
  };
  emit("stem", r.stem);
  for (std::size_t l = 0; l < r.per_layer.size(); ++l) emit("layer" + std::to_string(l), r.per_layer[l]);
  emit("head", r.head);
  for (std::size_t i = 0; i < kFlopPartCount; ++i)
    os << "total," << to_string(static_cast<FlopPart>(i)) << ',' << r.totals.macs[i] << '\n';
  os << "total,all," << r.total() << '\n';
}

}  // namespace trajattn
