// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end over the trajattn C API.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "trajattn/trajattn.h"

using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  bool csv = false;
  bool as_json = false;
  std::size_t seeds = 0;
};

json load_config(const std::string& arg) {
  if (arg.empty()) return json::object();
  std::string text = arg;
  if (arg.find('{') == std::string::npos) {
    std::ifstream f(arg);
    if (!f) throw std::runtime_error("cannot open config file '" + arg + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  return json::parse(text);
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  return out;
}

std::vector<std::string> parse_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

int run(const std::string& command, const json& options, const Common& common) {
  char* report = nullptr;
  char* csv = nullptr;
  const std::string opts = options.dump();
  const ta_status st = ta_run_command(command.c_str(), opts.c_str(), &report, &csv);
  if (st != TA_OK && st != TA_ERR_CHECK_FAILED) {
    std::cerr << "trajattn " << command << ": " << ta_status_name(st) << ": " << ta_last_error()
              << '\n';
    return 2;
  }
  const json doc = json::parse(report);
  for (const auto& line : doc.value("summary", json::array()))
    std::cerr << line.get<std::string>() << '\n';
  const std::string body = common.as_json ? doc.dump(2) + "\n" : std::string(csv);
  ta_string_free(report);
  ta_string_free(csv);
  if (common.out.empty()) {
    std::cout << body;
  } else {
    std::ofstream f(common.out);
    if (!f) {
      std::cerr << "trajattn: cannot write '" << common.out << "'\n";
      return 2;
    }
    f << body;
  }
  if (st == TA_ERR_CHECK_FAILED) {
    std::cerr << "trajattn " << command << ": " << ta_last_error() << '\n';
    return 1;
  }
  return 0;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON document, inline or as a file path");
  app->add_option_function<std::uint64_t>(
      "--seed", [&c](const std::uint64_t& s) { c.seed = s; c.seed_set = true; },
      "Root seed for all randomness");
  app->add_option("--out", c.out, "Write machine-readable output here instead of stdout");
  auto* csv = app->add_flag("--csv", c.csv, "Emit CSV (default)");
  auto* js = app->add_flag("--json", c.as_json, "Emit the JSON report");
  csv->excludes(js);
  app->add_option("--seeds", c.seeds, "Number of seeds or trials");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trajattn: trajectory attention verification and experiment harness"};
  app.require_subcommand(1);
  Common common;

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  add_common(grad, common);
  std::string targets;
  grad->add_option("--targets", targets, "Comma-separated target names (default: all)");

  auto* flops = app.add_subcommand("flops", "Analytic FLOP report");
  add_common(flops, common);
  std::string input;
  flops->add_option("--input", input, "Clip extent frames,height,width[,channels]");

  auto* sweep = app.add_subcommand("approx-sweep", "Attention approximation sweeps");
  add_common(sweep, common);
  std::string mode, ns, rs, methods, strategies, inputs;
  std::size_t d = 0, c = 0;
  sweep->add_option("--mode", mode, "error | scaling | sharing");
  sweep->add_option("--N", ns, "Comma-separated sequence lengths");
  sweep->add_option("--R", rs, "Comma-separated prototype counts");
  sweep->add_option("--methods", methods, "orthoformer,nystromformer,exact");
  sweep->add_option("--strategies", strategies, "orthogonal,random,segment_means");
  sweep->add_option("--inputs", inputs, "gaussian | clustered | identical_keys");
  sweep->add_option("--d", d, "Head width");
  sweep->add_option("--c", c, "Candidate pool factor");

  auto* train = app.add_subcommand("train-toy", "Train the toy model on moving dots");
  add_common(train, common);
  std::string attention;
  bool single_frame = false;
  std::size_t stride = 0;
  train->add_option("--attention", attention, "joint | divided | trajectory | trajectory_approx");
  train->add_flag("--single-frame", single_frame, "Feed only the middle frame");
  train->add_option("--stride", stride, "Temporal stride");

  auto* strides_cmd = app.add_subcommand("stride-sweep", "Accuracy margins across strides");
  add_common(strides_cmd, common);
  std::string strides, kinds;
  strides_cmd->add_option("--strides", strides, "Comma-separated strides");
  strides_cmd->add_option("--kinds", kinds, "Comma-separated attention kinds");

  auto* dump = app.add_subcommand("dump-attn", "Stage-one attention maps of a trained model");
  add_common(dump, common);
  std::size_t clips = 0;
  dump->add_option("--clips", clips, "Noise-free clips used for the tracking metric");

  CLI11_PARSE(app, argc, argv);

  try {
    const json config = load_config(common.config);
    json o = json::object();
    if (common.seed_set) o["seed"] = common.seed;
    if (common.seeds) o["seeds"] = common.seeds;
    if (grad->parsed()) {
      o.update(config);
      if (!targets.empty()) o["targets"] = parse_names(targets);
      return run("gradcheck", o, common);
    }
    if (flops->parsed()) {
      o.erase("seed");
      o.erase("seeds");
      if (!config.empty()) o["config"] = config;
      if (!input.empty()) o["input"] = parse_sizes(input);
      return run("flops", o, common);
    }
    if (sweep->parsed()) {
      o.update(config);
      if (!mode.empty()) o["mode"] = mode;
      if (!ns.empty()) o["N"] = parse_sizes(ns);
      if (!rs.empty()) o["R"] = parse_sizes(rs);
      if (!methods.empty()) o["methods"] = parse_names(methods);
      if (!strategies.empty()) o["strategies"] = parse_names(strategies);
      if (!inputs.empty()) o["inputs"] = inputs;
      if (d) o["d"] = d;
      if (c) o["c"] = c;
      return run("approx-sweep", o, common);
    }
    if (!config.empty()) o["config"] = config;
    if (train->parsed()) {
      if (!attention.empty()) o["attention"] = attention;
      if (single_frame) o["single_frame"] = true;
      if (stride) o["stride"] = stride;
      return run("train-toy", o, common);
    }
    if (strides_cmd->parsed()) {
      if (!strides.empty()) o["strides"] = parse_sizes(strides);
      if (!kinds.empty()) o["kinds"] = parse_names(kinds);
      return run("stride-sweep", o, common);
    }
    if (dump->parsed()) {
      o.erase("seeds");
      if (clips) o["clips"] = clips;
      return run("dump-attn", o, common);
    }
  } catch (const std::exception& e) {
    std::cerr << "trajattn: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
