// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

namespace trajattn {

// Counter-based generator. Draw n (1-based) is splitmix64's finaliser applied
// to seed + n * 0x9E3779B97F4A7C15; the state is only (seed, counter), so
// streams are reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  // Uniform integer in [0, n); unbiased via rejection. n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);
  double normal() noexcept;
  // Standard normal resampled until |z| <= 2.
  double truncated_normal() noexcept;

  // Independent stream derived from this generator's seed and a label.
  Rng fork(std::uint64_t stream) const noexcept;

  // First `count` entries of a uniformly random permutation of [0, n),
  // in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t count);

  Tensor normal_tensor(Shape shape, double std = 1.0);

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace trajattn
