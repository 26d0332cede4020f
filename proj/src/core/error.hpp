// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <type_traits>

namespace trajattn {

// Mirrors ta_status in the C header; keep the numeric values in sync.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kShapeMismatch = 2,
  kIo = 3,
  kBadMagic = 4,
  kTruncatedPayload = 5,
  kRankTooLarge = 6,
  kNumeric = 7,
  kConfig = 8,
  kCheckFailed = 9,
  kInternal = 10,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, ErrorCode code, const char* what) {
  if (!ok) fail(code, what);
}

// Builds the message only on failure.
template <typename F>
  requires std::is_invocable_r_v<std::string, F>
inline void require(bool ok, ErrorCode code, F&& what) {
  if (!ok) fail(code, what());
}

}  // namespace trajattn
