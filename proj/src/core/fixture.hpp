// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace trajattn {

// Tensor fixture layout, little-endian:
//   "TNSR" | u8 version (1) | u8 dtype (0 = f64, 1 = f32) | u16 rank |
//   rank x u64 dims | row-major payload
enum class DType : std::uint8_t { kF64 = 0, kF32 = 1 };

inline constexpr std::uint8_t kFixtureVersion = 1;
inline constexpr std::size_t kMaxFixtureRank = 8;

std::vector<std::uint8_t> encode_tensor(const Tensor& t,
                                        DType dtype = DType::kF64);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::string& path, const Tensor& t,
                  DType dtype = DType::kF64);
Tensor read_tensor(const std::string& path);

}  // namespace trajattn
