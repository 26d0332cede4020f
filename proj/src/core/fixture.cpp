// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "core/fixture.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "core/error.hpp"

namespace trajattn {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};
constexpr std::size_t kHeaderBytes = 4 + 1 + 1 + 2;

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

[[noreturn]] void truncated() {
  fail(ErrorCode::kTruncatedPayload, "truncated payload");
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t, DType dtype) {
  require(t.rank() <= kMaxFixtureRank, ErrorCode::kRankTooLarge,
          "rank > 8 is not representable in a fixture");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kFixtureVersion);
  out.push_back(static_cast<std::uint8_t>(dtype));
  put_le(out, t.rank(), 2);
  for (std::size_t d : t.shape()) put_le(out, d, 8);
  if (dtype == DType::kF64) {
    for (double v : t.data()) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  } else {
    for (double v : t.data())
      put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
  }
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(ErrorCode::kBadMagic, "bad magic");
  if (bytes.size() < kHeaderBytes) truncated();
  const std::uint8_t version = bytes[4];
  require(version == kFixtureVersion, ErrorCode::kInvalidArgument,
          [&] { return "unsupported fixture version " + std::to_string(version); });
  const std::uint8_t dtype = bytes[5];
  require(dtype <= 1, ErrorCode::kInvalidArgument,
          [&] { return "unsupported fixture dtype " + std::to_string(dtype); });
  const std::size_t rank = get_le(bytes.data() + 6, 2);
  require(rank <= kMaxFixtureRank, ErrorCode::kRankTooLarge,
          [&] { return "rank > 8 (" + std::to_string(rank) + ")"; });
  std::size_t pos = kHeaderBytes;
  if (bytes.size() < pos + 8 * rank) truncated();
  Shape shape(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i, pos += 8) {
    shape[i] = get_le(bytes.data() + pos, 8);
    require(shape[i] > 0, ErrorCode::kShapeMismatch,
            "fixture declares a zero-length dimension");
    require(count <= SIZE_MAX / shape[i] / 8, ErrorCode::kInvalidArgument,
            "fixture dimensions overflow");
    count *= shape[i];
  }
  const std::size_t width = dtype == 0 ? 8 : 4;
  if (bytes.size() - pos < count * width) truncated();
  require(bytes.size() - pos == count * width, ErrorCode::kInvalidArgument,
          "trailing bytes after fixture payload");
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i, pos += width) {
    if (dtype == 0) {
      data[i] = std::bit_cast<double>(get_le(bytes.data() + pos, 8));
    } else {
      data[i] = std::bit_cast<float>(
          static_cast<std::uint32_t>(get_le(bytes.data() + pos, 4)));
    }
  }
  return Tensor(std::move(shape), std::move(data));
}

void write_tensor(const std::string& path, const Tensor& t, DType dtype) {
  const auto bytes = encode_tensor(t, dtype);
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::kIo, [&] { return "cannot open " + path; });
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(f), ErrorCode::kIo, [&] { return "write failed: " + path; });
}

Tensor read_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::kIo, [&] { return "cannot open " + path; });
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

}  // namespace trajattn
