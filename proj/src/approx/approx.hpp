// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "approx/prototypes.hpp"
#include "attention/exact.hpp"
#include "core/tape.hpp"

namespace trajattn {

struct ApproxAttentionResult {
  Tensor output;      // [N, D]
  Tensor omega1;      // [N, R]
  Tensor omega2;      // Orthoformer: [R, N] keys; Nystrom: [R, R] before inversion
  Tensor omega2_inv;  // Nystrom only
  Tensor omega3;      // Nystrom only, [R, N]
  AllocationProbe probe;
};

// omega1 = softmax(q P^T), omega2 = softmax(P k^T), output = omega1 (omega2 v).
ApproxAttentionResult orthoformer_attention(const Tensor& q, const Tensor& k,
                                            const Tensor& v, const Tensor& P, double scale);

// Iterative Moore-Penrose approximation for a row-stochastic square matrix:
//   Z0 = a^T / (max_i sum_j |a_ij| * max_j sum_i |a_ij|)
//   Z  <- Z (13 I - aZ (15 I - aZ (7 I - aZ))) / 4
Tensor iterative_pinv(const Tensor& a, std::size_t n_iter = 6);

struct NystromConfig {
  std::size_t R = 64;
  std::size_t n_iter = 6;
};

// Landmarks are segment means of q and k; the output keeps the grouping
// omega1 (pinv(omega2) (omega3 v)).
ApproxAttentionResult nystromformer_attention(const Tensor& q, const Tensor& k,
                                              const Tensor& v, const NystromConfig& config,
                                              double scale);

namespace attn {

struct Orthoformer {
  Var output;
  Var omega1;
  Var omega2;
};

Orthoformer orthoformer(Var q, Var k, Var v, Var P, double scale);

// Prototype rows as a differentiable function of the stacked candidates.
Var prototype_rows(Var stacked, const PrototypeSet& set);

// Stage one with every per-frame attention replaced by the prototype
// factorisation. Shared mode builds one prototype set from all queries and
// keys and reuses softmax(q P^T) for every frame; unshared mode builds one set
// per frame t' from all queries plus that frame's keys. Maps are left empty.
Stage1 approx_trajectory_stage1(Var q, Var k, Var v, GridDims dims,
                                const PrototypeOptions& opts, double scale, Rng& rng,
                                std::vector<PrototypeSet>* sets = nullptr);

}  // namespace attn

struct ApproxStage1Result {
  TrajectoryIntermediate inter;  // maps hold the implied omega1 omega2 products
  std::vector<PrototypeSet> prototypes;
  AllocationProbe probe;
};

ApproxStage1Result approx_trajectory_stage1(GridDims dims, const Tensor& q, const Tensor& k,
                                            const Tensor& v, const PrototypeOptions& opts,
                                            double scale);

// ---- allocation probe ------------------------------------------------------

enum class AttentionMethod { kExact, kOrthoformer, kNystromformer };

std::string to_string(AttentionMethod m);
AttentionMethod parse_method(const std::string& name);

struct AllocationCounts {
  std::uint64_t attention = 0;        // score/probability matrix slots
  std::uint64_t prototype_build = 0;  // candidate pools and selection scratch
};

// Runs one attention evaluation on seeded Gaussian inputs of size [n, d] and
// reports the slots its intermediates occupied.
AllocationCounts allocation_probe(AttentionMethod method, std::size_t n, std::size_t d,
                                  std::size_t R, std::size_t c, std::uint64_t seed);

}  // namespace trajattn
