// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "model/config.hpp"

#include "core/error.hpp"

namespace trajattn {

using nlohmann::json;

std::string to_string(PosMode m) {
  return m == PosMode::kSeparate ? "separate" : "joint";
}

std::string to_string(AttentionKind k) {
  switch (k) {
    case AttentionKind::kJoint: return "joint";
    case AttentionKind::kDivided: return "divided";
    case AttentionKind::kTrajectory: return "trajectory";
    case AttentionKind::kTrajectoryApprox: return "trajectory_approx";
  }
  return "unknown";
}

std::string to_string(NormMode m) {
  return m == NormMode::kSpatialPerFrame ? "spatial" : "space_time";
}

std::string to_string(TemporalMode m) {
  return m == TemporalMode::kAttention ? "attention" : "average";
}

AttentionKind parse_attention_kind(const std::string& name) {
  if (name == "joint") return AttentionKind::kJoint;
  if (name == "divided") return AttentionKind::kDivided;
  if (name == "trajectory") return AttentionKind::kTrajectory;
  if (name == "trajectory_approx" || name == "orthoformer")
    return AttentionKind::kTrajectoryApprox;
  fail(ErrorCode::kConfig, "unknown attention kind '" + name + "'");
}

namespace {

NormMode parse_norm(const std::string& s) {
  if (s == "spatial" || s == "S") return NormMode::kSpatialPerFrame;
  if (s == "space_time" || s == "ST") return NormMode::kSpaceTime;
  fail(ErrorCode::kConfig, "unknown norm mode '" + s + "'");
}

TemporalMode parse_temporal(const std::string& s) {
  if (s == "attention") return TemporalMode::kAttention;
  if (s == "average") return TemporalMode::kAverage;
  fail(ErrorCode::kConfig, "unknown temporal mode '" + s + "'");
}

PosMode parse_pos(const std::string& s) {
  if (s == "separate") return PosMode::kSeparate;
  if (s == "joint") return PosMode::kJoint;
  fail(ErrorCode::kConfig, "unknown pos_mode '" + s + "'");
}

std::size_t positive(const json& doc, const char* key) {
  const json& v = doc.at(key);
  require(v.is_number_integer() && v.get<long long>() > 0, ErrorCode::kConfig,
          [&] { return std::string("'") + key + "' must be a positive integer"; });
  return v.get<std::size_t>();
}

}  // namespace

void ModelConfig::validate() const {
  require(patch.t > 0 && patch.h > 0 && patch.w > 0, ErrorCode::kConfig,
          "patch sizes must be positive");
  require(embed_dim > 0 && layers > 0 && heads > 0 && classes > 0, ErrorCode::kConfig,
          "embed_dim, layers, heads and classes must be positive");
  require(embed_dim % heads == 0, ErrorCode::kConfig,
          [&] { return "embed_dim " + std::to_string(embed_dim) + " is not divisible by heads " +
              std::to_string(heads); });
  if (attention == AttentionKind::kTrajectoryApprox)
    require(approx.R >= 1 && approx.c >= 1, ErrorCode::kConfig, "approx R and c must be >= 1");
}

GridDims ModelConfig::grid(const InputGeometry& in) const {
  validate();
  auto check = [](std::size_t extent, std::size_t p, const char* axis) {
    require(extent % p == 0, ErrorCode::kShapeMismatch,
            [&] { return std::string(axis) + " extent " + std::to_string(extent) +
                " is not divisible by patch size " + std::to_string(p); });
  };
  check(in.frames, patch.t, "time");
  check(in.height, patch.h, "height");
  check(in.width, patch.w, "width");
  require(in.channels > 0, ErrorCode::kShapeMismatch, "channels must be positive");
  return {(in.height / patch.h) * (in.width / patch.w), in.frames / patch.t};
}

ModelConfig model_config_from_json(const json& doc) {
  try {
    require(doc.is_object(), ErrorCode::kConfig, "model config must be a JSON object");
    ModelConfig c;
    const json& p = doc.at("patch");
    require(p.is_array() && p.size() == 3, ErrorCode::kConfig,
            "'patch' must be [t_p, h_p, w_p]");
    c.patch = {p[0].get<std::size_t>(), p[1].get<std::size_t>(), p[2].get<std::size_t>()};
    c.embed_dim = positive(doc, "embed_dim");
    c.layers = positive(doc, "layers");
    c.heads = positive(doc, "heads");
    c.classes = positive(doc, "classes");
    c.pos_mode = parse_pos(doc.at("pos_mode").get<std::string>());
    const json& a = doc.at("attention");
    if (a.is_string()) {
      c.attention = parse_attention_kind(a.get<std::string>());
    } else {
      c.attention = parse_attention_kind(a.at("kind").get<std::string>());
      if (a.contains("norm")) c.norm = parse_norm(a["norm"].get<std::string>());
      if (a.contains("temporal")) c.temporal = parse_temporal(a["temporal"].get<std::string>());
    }
    if (doc.contains("approx") && !doc["approx"].is_null()) {
      const json& x = doc["approx"];
      if (x.contains("strategy")) c.approx.strategy = parse_strategy(x["strategy"].get<std::string>());
      if (x.contains("R")) c.approx.R = x["R"].get<std::size_t>();
      if (x.contains("c")) c.approx.c = x["c"].get<std::size_t>();
      if (x.contains("shared")) c.approx.shared_across_time = x["shared"].get<bool>();
      if (x.contains("seed")) c.approx.seed = x["seed"].get<std::uint64_t>();
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("model config: ") + e.what());
  }
}

ModelConfig model_config_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("model config is not valid JSON: ") + e.what());
  }
  return model_config_from_json(doc);
}

json to_json(const ModelConfig& c) {
  json doc;
  doc["patch"] = {c.patch.t, c.patch.h, c.patch.w};
  doc["embed_dim"] = c.embed_dim;
  doc["layers"] = c.layers;
  doc["heads"] = c.heads;
  doc["pos_mode"] = to_string(c.pos_mode);
  doc["attention"] = {{"kind", to_string(c.attention)},
                      {"norm", to_string(c.norm)},
                      {"temporal", to_string(c.temporal)}};
  doc["classes"] = c.classes;
  doc["approx"] = {{"strategy", to_string(c.approx.strategy)},
                   {"R", c.approx.R},
                   {"c", c.approx.c},
                   {"shared", c.approx.shared_across_time},
                   {"seed", c.approx.seed}};
  return doc;
}

json to_json(const InputGeometry& in) {
  return {{"frames", in.frames},
          {"height", in.height},
          {"width", in.width},
          {"channels", in.channels}};
}

ModelConfig vit_base(PatchSize patch, AttentionKind kind) {
  ModelConfig c;
  c.patch = patch;
  c.attention = kind;
  return c;
}

}  // namespace trajattn
