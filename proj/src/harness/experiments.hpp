// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "approx/approx.hpp"
#include "core/gradcheck.hpp"
#include "harness/moving_dot.hpp"
#include "model/flops.hpp"
#include "model/model.hpp"

namespace trajattn {

using nlohmann::json;

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 when n < 2
  std::size_t n = 0;
};

Aggregate aggregate(std::span<const double> xs);
json to_json(const Aggregate& a);

struct ExperimentReport {
  std::string id;
  json config = json::object();
  std::vector<json> rows;
  // group -> metric -> {mean, std, n}, computed from rows.
  json aggregates = json::object();
  json extra = json::object();
  bool passed = true;
  std::vector<std::string> failures;
  std::vector<std::string> summary;  // human-readable lines

  void check(bool ok, const std::string& what);
  // Recomputes aggregates of `metrics` over rows grouped by the value of
  // `group_keys` (joined with '/'); an empty key list means one group "all".
  void aggregate_rows(const std::vector<std::string>& group_keys,
                      const std::vector<std::string>& metrics);
  json to_json() const;
};

// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

// ---- gradient checks -------------------------------------------------------------

struct GradTarget {
  std::string name;
  TapeFn fn;
  std::vector<Tensor> inputs;
};

std::vector<std::string> gradcheck_target_names();
GradTarget make_grad_target(const std::string& name, std::uint64_t seed);
// One row per (target, trial): target, seed, max_rel_error. Fails when any
// error reaches tol.
ExperimentReport run_gradcheck(const std::vector<std::string>& targets, std::uint64_t seed,
                               std::size_t trials = 1, double tol = 1e-4);

// ---- FLOPs ---------------------------------------------------------------------------

struct FlopReference {
  std::string name;
  ModelConfig config;
  InputGeometry input;
  double gflops = 0.0;
};

std::vector<FlopReference> flop_references();
// Reference configurations within +-10%, plus the trajectory/joint ratio
// 2.045 +- 0.05.
ExperimentReport run_flop_references();

// ---- approximation sweeps ----------------------------------------------------------

enum class SweepInputs { kGaussian, kClustered, kIdenticalKeys };
std::string to_string(SweepInputs s);
SweepInputs parse_sweep_inputs(const std::string& name);

struct ApproxSweepSpec {
  std::vector<std::size_t> Ns{64};
  std::vector<std::size_t> Rs{2, 8, 16};
  std::vector<AttentionMethod> methods{AttentionMethod::kOrthoformer,
                                       AttentionMethod::kNystromformer};
  std::vector<PrototypeStrategy> strategies{PrototypeStrategy::kMostOrthogonal};
  std::size_t seeds = 20;
  std::size_t d = 16;
  std::size_t c = 4;
  SweepInputs inputs = SweepInputs::kGaussian;
  std::uint64_t seed = 0;
};

struct AttentionInputs {
  Tensor q, k, v;
};
// Gaussian q, k, v; clustered draws put q and k rows near one of `clusters`
// random unit directions (norm 4, small jitter); identical keys repeat one
// key row.
AttentionInputs sweep_inputs(SweepInputs kind, std::size_t n, std::size_t d,
                             std::size_t clusters, Rng& rng);

json to_json(const ApproxSweepSpec& spec);
// Rows carry the CSV columns method, strategy, N, R, c, seed,
// rel_frobenius_error, intermediate_alloc_count, wall_time_ns.
ExperimentReport approx_sweep(const ApproxSweepSpec& spec);
void write_approx_csv(std::ostream& os, const ExperimentReport& report);

// Attention-slot counts over `ns` for exact attention and Orthoformer at
// fixed R, with fitted log-log slopes in extra.
ExperimentReport allocation_scaling(std::span<const std::size_t> ns, std::size_t R,
                                    std::size_t c, std::size_t d, std::uint64_t seed);

// Shared versus per-frame prototypes for approximate trajectory stage one.
ExperimentReport temporal_sharing(GridDims dims, std::size_t d, std::size_t R, std::size_t c,
                                  std::size_t seeds, std::uint64_t seed);

// ---- toy training ----------------------------------------------------------------------

enum class Optimizer { kSgd, kAdam };

struct ToyConfig {
  ModelConfig model;
  MovingDotSpec task;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t epochs = 0;
  std::size_t batch = 32;
  double lr = 0.0;
  Optimizer optimizer = Optimizer::kSgd;
  double init_std = 0.02;  // std of the truncated-normal weight init
  bool single_frame = false;  // feed only the middle frame
  std::uint64_t seed = 0;

  InputGeometry input() const;
};

ToyConfig toy_defaults();
// toy_defaults() on a 4-frame, 20x20 task so strides up to 3 fit the canvas.
ToyConfig stride_sweep_defaults();
// Overrides fields of `base` from {"model": {...}, "task": {...}, "train": {...}}.
ToyConfig toy_config_from_json(const json& doc, ToyConfig base = toy_defaults());
json to_json(const ToyConfig& config);

struct TrainResult {
  ExperimentReport report;  // one row per epoch
  ModelParams params;
  double test_accuracy = 0.0;
  double train_accuracy = 0.0;
  bool diverged = false;
};

TrainResult train_toy(const ToyConfig& config);

// Trains each kind at each stride for `seeds` seeds; extra["margins"] holds
// trajectory-minus-baseline mean accuracy per stride.
ExperimentReport stride_sweep(const ToyConfig& base, std::span<const std::size_t> strides,
                              std::size_t seeds,
                              std::span<const AttentionKind> kinds = {});

// Trains a trajectory model, then for noise-free clips takes the layer-0
// stage-one row of the query at the dot's middle-frame patch (averaged over
// heads) and checks whether its per-frame argmax lands on a patch the dot
// overlaps. Writes the first clip's maps as CSV when csv is non-null.
ExperimentReport dump_attn(const ToyConfig& config, std::size_t clips, std::ostream* csv);

// Stage-one maps of one clip under trained parameters, averaged over heads.
TrajectoryIntermediate head_averaged_maps(const VideoClip& clip, const ModelParams& params,
                                          const ModelConfig& config, std::size_t layer = 0);

}  // namespace trajattn
