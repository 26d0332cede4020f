// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace trajattn {

struct CommandOutput {
  nlohmann::json report;
  std::string csv;
  std::vector<std::string> summary;
  bool passed = true;
};

// Runs one harness command ("gradcheck", "flops", "approx-sweep",
// "train-toy", "stride-sweep", "dump-attn") with options given as a JSON
// object. Unknown option keys are rejected.
CommandOutput run_command(const std::string& name, const nlohmann::json& options);

std::vector<std::string> command_names();

}  // namespace trajattn
