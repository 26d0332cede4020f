// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "model/config.hpp"

namespace trajattn {

enum class FlopPart : std::size_t {
  kPatchEmbed,
  kQkvProj,
  kAttnScores,
  kAttnValues,
  kStage2Proj,
  kOutProj,
  kMlp,
  kHead,
};
inline constexpr std::size_t kFlopPartCount = 8;

const char* to_string(FlopPart part);

// Multiply-accumulate counts; one MAC counts as one FLOP. Only matrix
// products enter; softmax, normalisation, activations and residuals do not.
struct FlopBreakdown {
  std::array<std::uint64_t, kFlopPartCount> macs{};

  std::uint64_t& operator[](FlopPart p) { return macs[static_cast<std::size_t>(p)]; }
  std::uint64_t operator[](FlopPart p) const { return macs[static_cast<std::size_t>(p)]; }
  std::uint64_t total() const;
  FlopBreakdown& operator+=(const FlopBreakdown& other);
};

struct FlopReport {
  ModelConfig config;
  InputGeometry input;
  FlopBreakdown stem;                   // patch embedding
  std::vector<FlopBreakdown> per_layer;
  FlopBreakdown head;                   // classifier
  FlopBreakdown totals;                 // sum of the above

  std::uint64_t total() const { return totals.total(); }
  double gflops() const { return static_cast<double>(total()) * 1e-9; }
};

FlopReport flops_estimate(const ModelConfig& config, const InputGeometry& input);

nlohmann::json to_json(const FlopReport& report);
// Columns: scope,component,macs. Scope is "stem", "layer<i>", "head" or
// "total".
void write_flops_csv(std::ostream& os, const FlopReport& report);

}  // namespace trajattn
