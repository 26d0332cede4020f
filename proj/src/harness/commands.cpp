// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "harness/commands.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "core/error.hpp"
#include "harness/experiments.hpp"

namespace trajattn {

namespace {

void reject_unknown(const json& options, std::initializer_list<const char*> allowed) {
  require(options.is_object(), ErrorCode::kConfig, "command options must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = options.begin(); it != options.end(); ++it)
    require(ok.count(it.key()) != 0, ErrorCode::kConfig,
            [&] { return "unknown option '" + it.key() + "'"; });
}

template <typename T>
T get_or(const json& o, const char* key, T fallback) {
  return o.contains(key) && !o[key].is_null() ? o[key].get<T>() : fallback;
}

std::string cell(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  return v.dump();
}

std::string rows_csv(const std::vector<json>& rows, const std::vector<std::string>& columns) {
  std::ostringstream os;
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
  for (const json& row : rows) {
    for (std::size_t i = 0; i < columns.size(); ++i)
      os << (i ? "," : "") << (row.contains(columns[i]) ? cell(row[columns[i]]) : "");
    os << '\n';
  }
  return os.str();
}

CommandOutput finish(const ExperimentReport& r, std::string csv) {
  return {r.to_json(), std::move(csv), r.summary, r.passed};
}

ToyConfig toy_from_options(const json& o, ToyConfig c = toy_defaults()) {
  if (o.contains("config")) c = toy_config_from_json(o["config"], c);
  if (o.contains("attention"))
    c.model.attention = parse_attention_kind(o["attention"].get<std::string>());
  if (o.contains("single_frame")) c.single_frame = o["single_frame"].get<bool>();
  if (o.contains("stride")) c.task.stride = o["stride"].get<std::size_t>();
  if (o.contains("seed")) c.seed = o["seed"].get<std::uint64_t>();
  return c;
}

CommandOutput cmd_gradcheck(const json& o) {
  reject_unknown(o, {"targets", "seed", "seeds"});
  const auto targets = get_or(o, "targets", gradcheck_target_names());
  const ExperimentReport r =
      run_gradcheck(targets, get_or<std::uint64_t>(o, "seed", 0), get_or<std::size_t>(o, "seeds", 1));
  return finish(r, rows_csv(r.rows, {"target", "seed", "max_rel_error"}));
}

CommandOutput cmd_flops(const json& o) {
  reject_unknown(o, {"config", "input"});
  if (!o.contains("config")) {
    const ExperimentReport r = run_flop_references();
    return finish(r, rows_csv(r.rows, {"name", "gflops", "reference_gflops", "relative_deviation"}));
  }
  const ModelConfig config = model_config_from_json(o["config"]);
  InputGeometry input;
  if (o.contains("input")) {
    const auto v = o["input"].get<std::vector<std::size_t>>();
    require(v.size() == 3 || v.size() == 4, ErrorCode::kConfig,
            "input must be [frames, height, width] or [frames, height, width, channels]");
    input = {v[0], v[1], v[2], v.size() == 4 ? v[3] : 3};
  }
  const FlopReport f = flops_estimate(config, input);
  std::ostringstream csv;
  write_flops_csv(csv, f);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.3f GFLOPs per clip", f.gflops());
  return {to_json(f), csv.str(), {buf}, true};
}

CommandOutput cmd_approx_sweep(const json& o) {
  reject_unknown(o, {"mode", "N", "R", "methods", "strategies", "seeds", "d", "c", "inputs", "seed",
                     "S", "T"});
  const std::string mode = get_or<std::string>(o, "mode", "error");
  const std::uint64_t seed = get_or<std::uint64_t>(o, "seed", 0);
  if (mode == "scaling") {
    const auto ns = get_or(o, "N", std::vector<std::size_t>{64, 128, 256, 512});
    const auto rs = get_or(o, "R", std::vector<std::size_t>{16});
    require(rs.size() == 1, ErrorCode::kConfig, "scaling mode takes a single R");
    ExperimentReport r = allocation_scaling(ns, rs[0], get_or<std::size_t>(o, "c", 4),
                                            get_or<std::size_t>(o, "d", 16), seed);
    for (const char* m : {"exact", "orthoformer"}) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s log-log slope %.4f", m, r.extra["slope"][m].get<double>());
      r.summary.push_back(buf);
    }
    return finish(r, rows_csv(r.rows, {"method", "N", "attention_alloc", "prototype_build_alloc"}));
  }
  if (mode == "sharing") {
    const auto rs = get_or(o, "R", std::vector<std::size_t>{8});
    require(rs.size() == 1, ErrorCode::kConfig, "sharing mode takes a single R");
    const GridDims dims{get_or<std::size_t>(o, "S", 16), get_or<std::size_t>(o, "T", 4)};
    ExperimentReport r = temporal_sharing(dims, get_or<std::size_t>(o, "d", 16), rs[0],
                                          get_or<std::size_t>(o, "c", 4),
                                          get_or<std::size_t>(o, "seeds", 20), seed);
    return finish(r, rows_csv(r.rows, {"seed", "shared_rel_error", "unshared_rel_error",
                                       "shared_build_alloc", "unshared_build_alloc",
                                       "shared_attention_alloc", "unshared_attention_alloc"}));
  }
  require(mode == "error", ErrorCode::kConfig, "approx-sweep mode must be error, scaling or sharing");
  ApproxSweepSpec spec;
  spec.Ns = get_or(o, "N", spec.Ns);
  spec.Rs = get_or(o, "R", spec.Rs);
  if (o.contains("methods")) {
    spec.methods.clear();
    for (const auto& m : o["methods"]) spec.methods.push_back(parse_method(m.get<std::string>()));
  }
  if (o.contains("strategies")) {
    spec.strategies.clear();
    for (const auto& s : o["strategies"])
      spec.strategies.push_back(parse_strategy(s.get<std::string>()));
  }
  spec.seeds = get_or(o, "seeds", spec.seeds);
  spec.d = get_or(o, "d", spec.d);
  spec.c = get_or(o, "c", spec.c);
  if (o.contains("inputs")) spec.inputs = parse_sweep_inputs(o["inputs"].get<std::string>());
  spec.seed = seed;
  ExperimentReport r = approx_sweep(spec);
  for (auto it = r.aggregates.begin(); it != r.aggregates.end(); ++it) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-40s mean rel error %.4e (n=%zu)", it.key().c_str(),
                  it.value()["rel_frobenius_error"]["mean"].get<double>(),
                  it.value()["rel_frobenius_error"]["n"].get<std::size_t>());
    r.summary.push_back(buf);
  }
  std::ostringstream csv;
  write_approx_csv(csv, r);
  return finish(r, csv.str());
}

CommandOutput cmd_train_toy(const json& o) {
  reject_unknown(o, {"config", "attention", "single_frame", "stride", "seed", "seeds"});
  const ToyConfig base = toy_from_options(o);
  const std::size_t seeds = get_or<std::size_t>(o, "seeds", 1);
  require(seeds >= 1, ErrorCode::kConfig, "seeds must be >= 1");
  ExperimentReport r;
  r.id = "train-toy";
  r.config = to_json(base);
  r.config["seeds"] = seeds;
  for (std::size_t s = 0; s < seeds; ++s) {
    ToyConfig c = base;
    c.seed = base.seed + s;
    const TrainResult t = train_toy(c);
    for (json row : t.report.rows) {
      row["seed"] = c.seed;
      r.rows.push_back(row);
    }
    for (const std::string& line : t.report.summary)
      r.summary.push_back("seed " + std::to_string(c.seed) + ": " + line);
    r.extra["final"].push_back({{"seed", c.seed}, {"test_accuracy", t.test_accuracy},
                                {"train_accuracy", t.train_accuracy}, {"diverged", t.diverged}});
    if (t.diverged) r.check(false, "seed " + std::to_string(c.seed) + " diverged");
  }
  r.aggregate_rows({"epoch"}, {"train_loss", "train_accuracy", "test_accuracy"});
  return finish(r, rows_csv(r.rows, {"seed", "epoch", "train_loss", "train_accuracy", "test_accuracy"}));
}

CommandOutput cmd_stride_sweep(const json& o) {
  reject_unknown(o, {"config", "strides", "seeds", "seed", "kinds"});
  const ToyConfig base = toy_from_options(o, stride_sweep_defaults());
  const auto strides = get_or(o, "strides", std::vector<std::size_t>{1, 2, 3});
  std::vector<AttentionKind> kinds;
  if (o.contains("kinds"))
    for (const auto& k : o["kinds"]) kinds.push_back(parse_attention_kind(k.get<std::string>()));
  const ExperimentReport r = stride_sweep(base, strides, get_or<std::size_t>(o, "seeds", 3), kinds);
  return finish(r, rows_csv(r.rows, {"stride", "kind", "seed", "test_accuracy"}));
}

CommandOutput cmd_dump_attn(const json& o) {
  reject_unknown(o, {"config", "seed", "clips"});
  const ToyConfig c = toy_from_options(o);
  std::ostringstream csv;
  const ExperimentReport r = dump_attn(c, get_or<std::size_t>(o, "clips", 16), &csv);
  return finish(r, csv.str());
}

}  // namespace

std::vector<std::string> command_names() {
  return {"gradcheck", "flops", "approx-sweep", "train-toy", "stride-sweep", "dump-attn"};
}

CommandOutput run_command(const std::string& name, const json& options) {
  try {
    if (name == "gradcheck") return cmd_gradcheck(options);
    if (name == "flops") return cmd_flops(options);
    if (name == "approx-sweep") return cmd_approx_sweep(options);
    if (name == "train-toy") return cmd_train_toy(options);
    if (name == "stride-sweep") return cmd_stride_sweep(options);
    if (name == "dump-attn") return cmd_dump_attn(options);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, name + ": " + e.what());
  }
  fail(ErrorCode::kInvalidArgument, "unknown command '" + name + "'");
}

}  // namespace trajattn
