// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

#include "approx/prototypes.hpp"
#include "attention/exact.hpp"
#include "json.hpp"

namespace trajattn {

enum class PosMode { kSeparate, kJoint };
enum class AttentionKind { kJoint, kDivided, kTrajectory, kTrajectoryApprox };

std::string to_string(PosMode m);
std::string to_string(AttentionKind k);
std::string to_string(NormMode m);
std::string to_string(TemporalMode m);
AttentionKind parse_attention_kind(const std::string& name);

struct PatchSize {
  std::size_t t = 2, h = 16, w = 16;
  std::size_t volume() const noexcept { return t * h * w; }
};

// Raw clip extent. Kept out of the model document; callers pass it
// alongside the config.
struct InputGeometry {
  std::size_t frames = 16, height = 224, width = 224, channels = 3;
};

struct ModelConfig {
  PatchSize patch;
  std::size_t embed_dim = 768;
  std::size_t layers = 12;
  std::size_t heads = 12;
  PosMode pos_mode = PosMode::kSeparate;
  AttentionKind attention = AttentionKind::kTrajectory;
  NormMode norm = NormMode::kSpatialPerFrame;
  TemporalMode temporal = TemporalMode::kAttention;
  PrototypeOptions approx;
  std::size_t classes = 400;

  std::size_t head_width() const { return embed_dim / heads; }
  bool uses_stage2_projections() const {
    return (attention == AttentionKind::kTrajectory ||
            attention == AttentionKind::kTrajectoryApprox) &&
           temporal == TemporalMode::kAttention;
  }
  void validate() const;
  // Token grid for a clip; divisibility failures name the axis.
  GridDims grid(const InputGeometry& input) const;
};

ModelConfig model_config_from_json(const nlohmann::json& doc);
ModelConfig model_config_from_string(const std::string& text);
nlohmann::json to_json(const ModelConfig& config);
nlohmann::json to_json(const InputGeometry& input);

// Base ViT-B shape (D=768, 12 layers, 12 heads) with the given patch and kind.
ModelConfig vit_base(PatchSize patch, AttentionKind kind);

}  // namespace trajattn
