// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core/rng.hpp"
#include "core/tape.hpp"
#include "core/tensor.hpp"

namespace trajattn {

enum class PrototypeStrategy { kMostOrthogonal, kRandom, kSegmentMeans };

std::string to_string(PrototypeStrategy s);
PrototypeStrategy parse_strategy(const std::string& name);

struct PrototypeOptions {
  std::size_t R = 128;
  std::size_t c = 4;  // candidate pool holds c * R rows
  PrototypeStrategy strategy = PrototypeStrategy::kMostOrthogonal;
  bool shared_across_time = true;
  std::uint64_t seed = 0;
  // Forces the first greedy pick to this candidate position instead of a
  // random draw. Only meaningful for kMostOrthogonal.
  std::optional<std::size_t> fixed_start;
};

struct PrototypeSet {
  Tensor P;                          // [R, D]
  std::vector<std::size_t> indices;  // rows of [q; k] chosen, in selection order
  std::size_t requested = 0;         // R asked for
  bool clamped = false;              // true when the pool held fewer than R rows
  PrototypeStrategy strategy = PrototypeStrategy::kMostOrthogonal;

  std::size_t R() const { return P.rows(); }
};

// Greedy core over explicit candidate rows: starting from `start`, repeatedly
// add the candidate whose largest |cos| to the chosen set is smallest (ties
// go to the lowest position). Zero-norm rows score 1 and never raise other
// candidates' scores. Returns positions into `rows`.
std::vector<std::size_t> greedy_most_orthogonal(const Tensor& rows, std::size_t R,
                                                std::size_t start,
                                                AllocationProbe* probe = nullptr);

// Samples min(c R, Nq + Nk) candidates from [q; k] without replacement (kept
// in ascending row order; skipped when the pool is no larger than c R), draws
// the starting candidate uniformly, then runs the greedy selection. R is
// clamped to the pool size.
PrototypeSet most_orthogonal_subset(const Tensor& q, const Tensor& k, std::size_t R,
                                    std::size_t c, Rng& rng,
                                    std::optional<std::size_t> fixed_start = std::nullopt,
                                    AllocationProbe* probe = nullptr);

// R rows of [q; k] drawn uniformly without replacement, in draw order.
PrototypeSet random_prototypes(const Tensor& q, const Tensor& k, std::size_t R, Rng& rng,
                               AllocationProbe* probe = nullptr);

// Means over R contiguous row segments; the first N mod R segments hold
// ceil(N / R) rows. Throws when R > N.
Tensor segment_means(const Tensor& x, std::size_t R);
std::pair<Tensor, Tensor> segment_means(const Tensor& q, const Tensor& k, std::size_t R);
// Averaging operator M [R, N] with segment_means(x, R) == M x.
Tensor segment_mean_matrix(std::size_t n, std::size_t R);

// Prototype rows chosen from the stacked candidates under `opts`. For
// kSegmentMeans the prototypes are segment means of the stacked rows.
PrototypeSet select_prototypes(const Tensor& q, const Tensor& k, const PrototypeOptions& opts,
                               Rng& rng, AllocationProbe* probe = nullptr);

}  // namespace trajattn
