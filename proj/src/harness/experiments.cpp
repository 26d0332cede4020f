// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "harness/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>

#include "core/error.hpp"

namespace trajattn {

// ---- reports -----------------------------------------------------------------------

Aggregate aggregate(std::span<const double> xs) {
  Aggregate a;
  a.n = xs.size();
  if (xs.empty()) return a;
  a.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(a.n);
  if (a.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(a.n - 1));
  }
  return a;
}

json to_json(const Aggregate& a) { return {{"mean", a.mean}, {"std", a.std}, {"n", a.n}}; }

void ExperimentReport::check(bool ok, const std::string& what) {
  summary.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  if (!ok) {
    passed = false;
    failures.push_back(what);
  }
}

namespace {

std::string key_string(const json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

void ExperimentReport::aggregate_rows(const std::vector<std::string>& group_keys,
                                      const std::vector<std::string>& metrics) {
  std::map<std::string, std::map<std::string, std::vector<double>>> groups;
  for (const json& row : rows) {
    std::string g;
    for (const std::string& k : group_keys) {
      if (!g.empty()) g += '/';
      g += key_string(row.at(k));
    }
    if (g.empty()) g = "all";
    for (const std::string& m : metrics)
      if (row.contains(m) && row[m].is_number()) groups[g][m].push_back(row[m].get<double>());
  }
  aggregates = json::object();
  for (const auto& [g, ms] : groups)
    for (const auto& [m, xs] : ms) aggregates[g][m] = trajattn::to_json(aggregate(xs));
}

json ExperimentReport::to_json() const {
  json j;
  j["experiment"] = id;
  j["config"] = config;
  j["rows"] = rows;
  j["aggregates"] = aggregates;
  if (!extra.empty()) j["extra"] = extra;
  j["passed"] = passed;
  j["failures"] = failures;
  return j;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::kInvalidArgument,
          "slope fit needs at least two paired points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, ErrorCode::kInvalidArgument,
            "log-log fit needs positive values");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  require(sxx > 0.0, ErrorCode::kInvalidArgument, "slope fit needs distinct x values");
  return sxy / sxx;
}

// ---- gradient checks -------------------------------------------------------------------

namespace {

ModelConfig tiny_model(AttentionKind kind) {
  ModelConfig c;
  c.patch = {1, 2, 2};
  c.embed_dim = 8;
  c.layers = 1;
  c.heads = 2;
  c.classes = 3;
  c.attention = kind;
  c.approx.R = 3;
  c.approx.c = 2;
  return c;
}

// Two 4x4 frames with patch (1, 2, 2): S = 4, T = 2.
constexpr InputGeometry kTinyInput{2, 4, 4, 1};

// Generic parameter values: unit-scale weights and gains near one keep every
// path of the network well away from flat regions.
ModelParams generic_params(const ModelConfig& config, Rng& rng) {
  ModelParams p = ModelParams::zeros(config, kTinyInput);
  for (std::size_t i = 0; i < p.count(); ++i) {
    const std::string& name = p.names()[i];
    const bool gain = name.size() > 2 && name.compare(name.size() - 2, 2, ".g") == 0;
    for (double& v : p.values()[i].data()) v = (gain ? 1.0 : 0.0) + 0.4 * rng.normal();
  }
  return p;
}

GradTarget kernel_target(const std::string& name, Rng& rng) {
  const GridDims dims{3, 2};
  const std::size_t n = dims.tokens(), d = 4;
  const double scale = 0.7;
  const Tensor w = rng.normal_tensor({n, d});
  auto qkv = [&] {
    return std::vector<Tensor>{rng.normal_tensor({n, d}), rng.normal_tensor({n, d}),
                               rng.normal_tensor({n, d})};
  };
  if (name == "softmax_rows")
    return {name, [w](Tape&, std::span<const Var> x) {
              return ad::weighted_sum(ad::softmax_rows(x[0], 0.8), w);
            }, {rng.normal_tensor({n, d})}};
  if (name == "layer_norm") {
    return {name, [w](Tape&, std::span<const Var> x) {
              return ad::weighted_sum(ad::layer_norm(x[0], x[1], x[2]), w);
            }, {rng.normal_tensor({n, d}), rng.normal_tensor({d}), rng.normal_tensor({d})}};
  }
  if (name == "gelu")
    return {name, [w](Tape&, std::span<const Var> x) {
              return ad::weighted_sum(ad::gelu(x[0]), w);
            }, {rng.normal_tensor({n, d})}};
  if (name == "matmul")
    return {name, [w](Tape&, std::span<const Var> x) {
              return ad::weighted_sum(ad::matmul(x[0], x[1]), w);
            }, {rng.normal_tensor({n, 5}), rng.normal_tensor({5, d})}};
  if (name == "cross_entropy")
    return {name, [](Tape&, std::span<const Var> x) { return ad::cross_entropy(x[0], 2); },
            {rng.normal_tensor({1, 5})}};
  if (name == "joint")
    return {name, [w, scale](Tape&, std::span<const Var> x) {
              return ad::weighted_sum(attn::joint(x[0], x[1], x[2], scale), w);
            }, qkv()};
  if (name == "divided_space")
    return {name, [w, scale, dims](Tape&, std::span<const Var> x) {
              return ad::weighted_sum(attn::divided_space(x[0], x[1], x[2], dims, scale), w);
            }, qkv()};
  if (name == "divided_time")
    return {name, [w, scale, dims](Tape&, std::span<const Var> x) {
              return ad::weighted_sum(attn::divided_time(x[0], x[1], x[2], dims, scale), w);
            }, qkv()};
  if (name.rfind("trajectory_", 0) == 0) {
    const NormMode norm =
        name.find("_st_") != std::string::npos ? NormMode::kSpaceTime : NormMode::kSpatialPerFrame;
    const TemporalMode temporal = name.ends_with("_avg") ? TemporalMode::kAverage
                                                         : TemporalMode::kAttention;
    std::vector<Tensor> in = qkv();
    for (int i = 0; i < 3; ++i) in.push_back(rng.normal_tensor({d, d}));
    return {name, [=](Tape&, std::span<const Var> x) {
              auto st = attn::trajectory_stage1(x[0], x[1], x[2], dims, scale, norm);
              return ad::weighted_sum(
                  attn::trajectory_stage2(st, x[3], x[4], x[5], scale, temporal), w);
            }, in};
  }
  if (name == "cls") {
    const Tensor wc = rng.normal_tensor({1, d});
    return {name, [wc, scale](Tape&, std::span<const Var> x) {
              return ad::weighted_sum(attn::cls(x[0], x[1], x[2], scale), wc);
            }, {rng.normal_tensor({1, d}), rng.normal_tensor({n + 1, d}),
                rng.normal_tensor({n + 1, d})}};
  }
  if (name == "orthoformer") {
    std::vector<Tensor> in = qkv();
    in.push_back(rng.normal_tensor({3, d}));
    return {name, [w, scale](Tape&, std::span<const Var> x) {
              return ad::weighted_sum(attn::orthoformer(x[0], x[1], x[2], x[3], scale).output,
                                      w);
            }, in};
  }
  fail(ErrorCode::kInvalidArgument, "unknown gradcheck target '" + name + "'");
}

GradTarget block_target(const std::string& name, const ModelConfig& config, Rng& rng) {
  const GridDims dims = config.grid(kTinyInput);
  auto params = std::make_shared<ModelParams>(generic_params(config, rng));
  std::vector<std::size_t> slots;
  std::vector<Tensor> inputs{rng.normal_tensor({dims.tokens() + 1, config.embed_dim})};
  for (std::size_t i = 0; i < params->count(); ++i) {
    if (params->names()[i].rfind("block0.", 0) == 0) {
      slots.push_back(i);
      inputs.push_back(params->values()[i]);
    }
  }
  const Tensor w = rng.normal_tensor(inputs[0].shape());
  return {name, [=](Tape& tape, std::span<const Var> x) {
            std::vector<Var> vars;
            for (const Tensor& t : params->values()) vars.push_back(tape.constant(t));
            for (std::size_t j = 0; j < slots.size(); ++j) vars[slots[j]] = x[j + 1];
            const BoundParams p(*params, std::move(vars));
            return ad::weighted_sum(block_forward(x[0], p, 0, {config, dims}), w);
          }, inputs};
}

GradTarget model_target(const std::string& name, Rng& rng) {
  const ModelConfig config = tiny_model(AttentionKind::kTrajectory);
  const GridDims dims = config.grid(kTinyInput);
  auto params = std::make_shared<ModelParams>(generic_params(config, rng));
  const Tensor patches = extract_patches(
      VideoClip(rng.normal_tensor({kTinyInput.frames, 1, kTinyInput.height, kTinyInput.width})),
      config.patch);
  return {name, [=](Tape& tape, std::span<const Var> x) {
            const BoundParams p(*params, std::vector<Var>(x.begin(), x.end()));
            return ad::cross_entropy(forward(tape, patches, p, config, dims), 1);
          }, params->values()};
}

}  // namespace

std::vector<std::string> gradcheck_target_names() {
  return {"softmax_rows",   "layer_norm",      "gelu",
          "matmul",         "cross_entropy",   "joint",
          "divided_space",  "divided_time",    "trajectory_s_att",
          "trajectory_s_avg", "trajectory_st_att", "trajectory_st_avg",
          "cls",            "orthoformer",     "block_joint",
          "block_divided",  "block_trajectory", "block_trajectory_avg",
          "model_tiny"};
}

GradTarget make_grad_target(const std::string& name, std::uint64_t seed) {
  Rng rng(seed);
  if (name == "block_joint") return block_target(name, tiny_model(AttentionKind::kJoint), rng);
  if (name == "block_divided")
    return block_target(name, tiny_model(AttentionKind::kDivided), rng);
  if (name == "block_trajectory")
    return block_target(name, tiny_model(AttentionKind::kTrajectory), rng);
  if (name == "block_trajectory_avg") {
    ModelConfig config = tiny_model(AttentionKind::kTrajectory);
    config.temporal = TemporalMode::kAverage;
    return block_target(name, config, rng);
  }
  if (name == "model_tiny") return model_target(name, rng);
  return kernel_target(name, rng);
}

ExperimentReport run_gradcheck(const std::vector<std::string>& targets, std::uint64_t seed,
                               std::size_t trials, double tol) {
  ExperimentReport r;
  r.id = "gradcheck";
  r.config = {{"targets", targets}, {"seed", seed}, {"trials", trials}, {"tolerance", tol},
              {"eps", 1e-5}};
  const Rng root(seed);
  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    double worst = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
      const std::uint64_t s = root.fork(ti * 1000003 + trial).next_u64();
      const GradTarget target = make_grad_target(targets[ti], s);
      const double err = gradcheck(target.fn, target.inputs).max_relative_error;
      worst = std::max(worst, err);
      r.rows.push_back({{"target", targets[ti]}, {"seed", s}, {"max_rel_error", err}});
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22s max relative error %.3e", targets[ti].c_str(), worst);
    r.check(worst < tol, buf);
  }
  r.aggregate_rows({"target"}, {"max_rel_error"});
  return r;
}

// ---- FLOPs ---------------------------------------------------------------------------

std::vector<FlopReference> flop_references() {
  const InputGeometry base{16, 224, 224, 3};
  return {
      {"joint_cubic", vit_base({2, 16, 16}, AttentionKind::kJoint), base, 180.6},
      {"trajectory_cubic", vit_base({2, 16, 16}, AttentionKind::kTrajectory), base, 369.5},
      {"divided_cubic", vit_base({2, 16, 16}, AttentionKind::kDivided), base, 185.8},
      {"mformer_l", vit_base({2, 16, 16}, AttentionKind::kTrajectory), {32, 224, 224, 3},
       1185.1},
      {"mformer_hr", vit_base({2, 16, 16}, AttentionKind::kTrajectory), {16, 336, 336, 3},
       958.8},
  };
}

ExperimentReport run_flop_references() {
  ExperimentReport r;
  r.id = "flops";
  std::map<std::string, double> got;
  for (const FlopReference& ref : flop_references()) {
    const FlopReport f = flops_estimate(ref.config, ref.input);
    got[ref.name] = f.gflops();
    const double rel = f.gflops() / ref.gflops - 1.0;
    r.rows.push_back({{"name", ref.name},
                      {"gflops", f.gflops()},
                      {"reference_gflops", ref.gflops},
                      {"relative_deviation", rel},
                      {"report", to_json(f)}});
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-18s %8.2f GFLOPs (reference %7.1f, %+.2f%%)",
                  ref.name.c_str(), f.gflops(), ref.gflops, 100.0 * rel);
    r.check(std::abs(rel) <= 0.10, buf);
  }
  const double ratio = got["trajectory_cubic"] / got["joint_cubic"];
  r.extra["trajectory_joint_ratio"] = ratio;
  char buf[96];
  std::snprintf(buf, sizeof buf, "trajectory/joint ratio %.4f (reference 2.045)", ratio);
  r.check(std::abs(ratio - 2.045) <= 0.05, buf);
  return r;
}

// ---- approximation sweeps ----------------------------------------------------------

std::string to_string(SweepInputs s) {
  switch (s) {
    case SweepInputs::kGaussian: return "gaussian";
    case SweepInputs::kClustered: return "clustered";
    case SweepInputs::kIdenticalKeys: return "identical_keys";
  }
  return "unknown";
}

SweepInputs parse_sweep_inputs(const std::string& name) {
  if (name == "gaussian") return SweepInputs::kGaussian;
  if (name == "clustered") return SweepInputs::kClustered;
  if (name == "identical_keys") return SweepInputs::kIdenticalKeys;
  fail(ErrorCode::kConfig, "unknown sweep input kind '" + name + "'");
}

AttentionInputs sweep_inputs(SweepInputs kind, std::size_t n, std::size_t d,
                             std::size_t clusters, Rng& rng) {
  AttentionInputs in{rng.normal_tensor({n, d}), rng.normal_tensor({n, d}),
                     rng.normal_tensor({n, d})};
  if (kind == SweepInputs::kIdenticalKeys) {
    for (std::size_t i = 1; i < n; ++i)
      std::copy_n(in.k.row(0).begin(), d, in.k.row(i).begin());
  } else if (kind == SweepInputs::kClustered) {
    require(clusters >= 1, ErrorCode::kInvalidArgument, "clustered inputs need clusters >= 1");
    Tensor dirs = rng.normal_tensor({clusters, d});
    for (std::size_t c = 0; c < clusters; ++c) {
      auto r = dirs.row(c);
      double norm = 0.0;
      for (double x : r) norm += x * x;
      for (double& x : r) x *= 4.0 / std::sqrt(norm);
    }
    for (Tensor* m : {&in.q, &in.k}) {
      for (std::size_t i = 0; i < n; ++i) {
        auto dir = dirs.row(rng.uniform_index(clusters));
        auto r = m->row(i);
        for (std::size_t j = 0; j < d; ++j) r[j] = dir[j] + 0.1 * rng.normal();
      }
    }
  }
  return in;
}

json to_json(const ApproxSweepSpec& s) {
  std::vector<std::string> methods, strategies;
  for (AttentionMethod m : s.methods) methods.push_back(to_string(m));
  for (PrototypeStrategy p : s.strategies) strategies.push_back(to_string(p));
  return {{"N", s.Ns},           {"R", s.Rs},         {"methods", methods},
          {"strategies", strategies}, {"seeds", s.seeds}, {"d", s.d},
          {"c", s.c},           {"inputs", to_string(s.inputs)}, {"seed", s.seed}};
}

ExperimentReport approx_sweep(const ApproxSweepSpec& spec) {
  using Clock = std::chrono::steady_clock;
  ExperimentReport r;
  r.id = "approx-sweep";
  r.config = to_json(spec);
  const Rng root(spec.seed);
  for (std::size_t n : spec.Ns) {
    for (std::size_t R : spec.Rs) {
      for (std::size_t trial = 0; trial < spec.seeds; ++trial) {
        Rng data = root.fork(n * 1000003 + trial);
        const AttentionInputs in = sweep_inputs(spec.inputs, n, spec.d, R, data);
        const double scale = default_scale(spec.d);
        const Tensor exact = joint_attention(in.q, in.k, in.v, scale);
        auto emit = [&](AttentionMethod m, const std::string& strategy, const Tensor& out,
                        std::uint64_t alloc, long long ns) {
          r.rows.push_back({{"method", to_string(m)},
                            {"strategy", strategy},
                            {"N", n},
                            {"R", R},
                            {"c", spec.c},
                            {"seed", trial},
                            {"rel_frobenius_error", relative_error(out, exact)},
                            {"intermediate_alloc_count", alloc},
                            {"wall_time_ns", ns}});
        };
        for (AttentionMethod m : spec.methods) {
          if (m == AttentionMethod::kNystromformer) {
            if (R > n) continue;
            const auto t0 = Clock::now();
            const ApproxAttentionResult res =
                nystromformer_attention(in.q, in.k, in.v, {R, 6}, scale);
            const auto dt = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0);
            emit(m, to_string(PrototypeStrategy::kSegmentMeans), res.output,
                 res.probe[AllocKind::kAttentionMatrix], dt.count());
          } else if (m == AttentionMethod::kOrthoformer) {
            for (PrototypeStrategy st : spec.strategies) {
              Rng proto = Rng(spec.seed).fork(0x5eed).fork(n * 1000003 + trial);
              PrototypeOptions opts;
              opts.R = R;
              opts.c = spec.c;
              opts.strategy = st;
              const auto t0 = Clock::now();
              const PrototypeSet set = select_prototypes(in.q, in.k, opts, proto);
              const ApproxAttentionResult res = orthoformer_attention(in.q, in.k, in.v, set.P, scale);
              const auto dt = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0);
              emit(m, to_string(st), res.output, res.probe[AllocKind::kAttentionMatrix], dt.count());
            }
          } else {
            Tape tape;
            const auto t0 = Clock::now();
            const Tensor out =
                attn::joint(tape.constant(in.q), tape.constant(in.k), tape.constant(in.v), scale)
                    .value();
            const auto dt = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0);
            emit(m, "none", out, tape.probe()[AllocKind::kAttentionMatrix], dt.count());
          }
        }
      }
    }
  }
  r.aggregate_rows({"method", "strategy", "N", "R"},
                   {"rel_frobenius_error", "intermediate_alloc_count", "wall_time_ns"});
  return r;
}

void write_approx_csv(std::ostream& os, const ExperimentReport& report) {
  os << "method,strategy,N,R,c,seed,rel_frobenius_error,intermediate_alloc_count,wall_time_ns\n";
  char buf[64];
  for (const json& row : report.rows) {
    std::snprintf(buf, sizeof buf, "%.17g", row["rel_frobenius_error"].get<double>());
    os << row["method"].get<std::string>() << ',' << row["strategy"].get<std::string>() << ','
       << row["N"] << ',' << row["R"] << ',' << row["c"] << ',' << row["seed"] << ',' << buf
       << ',' << row["intermediate_alloc_count"] << ',' << row["wall_time_ns"] << '\n';
  }
}

ExperimentReport allocation_scaling(std::span<const std::size_t> ns, std::size_t R,
                                    std::size_t c, std::size_t d, std::uint64_t seed) {
  ExperimentReport r;
  r.id = "allocation-scaling";
  r.config = {{"N", std::vector<std::size_t>(ns.begin(), ns.end())}, {"R", R}, {"c", c},
              {"d", d}, {"seed", seed}};
  for (AttentionMethod m : {AttentionMethod::kExact, AttentionMethod::kOrthoformer}) {
    std::vector<double> xs, ys;
    for (std::size_t n : ns) {
      const AllocationCounts a = allocation_probe(m, n, d, R, c, seed);
      r.rows.push_back({{"method", to_string(m)},
                        {"N", n},
                        {"attention_alloc", a.attention},
                        {"prototype_build_alloc", a.prototype_build}});
      xs.push_back(static_cast<double>(n));
      ys.push_back(static_cast<double>(a.attention));
    }
    r.extra["slope"][to_string(m)] = loglog_slope(xs, ys);
  }
  r.aggregate_rows({"method"}, {"attention_alloc"});
  return r;
}

ExperimentReport temporal_sharing(GridDims dims, std::size_t d, std::size_t R, std::size_t c,
                                  std::size_t seeds, std::uint64_t seed) {
  ExperimentReport r;
  r.id = "temporal-sharing";
  r.config = {{"S", dims.S}, {"T", dims.T}, {"d", d}, {"R", R}, {"c", c}, {"seeds", seeds},
              {"seed", seed}};
  const double scale = default_scale(d);
  const Rng root(seed);
  for (std::size_t trial = 0; trial < seeds; ++trial) {
    Rng data = root.fork(trial);
    const Tensor q = data.normal_tensor({dims.tokens(), d});
    const Tensor k = data.normal_tensor({dims.tokens(), d});
    const Tensor v = data.normal_tensor({dims.tokens(), d});
    const TrajectoryIntermediate exact =
        trajectory_stage1(dims, q, k, v, scale, NormMode::kSpatialPerFrame);
    PrototypeOptions opts;
    opts.R = R;
    opts.c = c;
    opts.seed = data.next_u64();
    json row{{"seed", trial}};
    for (bool shared : {true, false}) {
      opts.shared_across_time = shared;
      const ApproxStage1Result a = approx_trajectory_stage1(dims, q, k, v, opts, scale);
      const std::string tag = shared ? "shared" : "unshared";
      row[tag + "_rel_error"] = relative_error(a.inter.tokens, exact.tokens);
      row[tag + "_build_alloc"] = a.probe[AllocKind::kPrototypeBuild];
      row[tag + "_attention_alloc"] = a.probe[AllocKind::kAttentionMatrix];
    }
    r.rows.push_back(row);
  }
  r.aggregate_rows({}, {"shared_rel_error", "unshared_rel_error", "shared_build_alloc",
                        "unshared_build_alloc"});
  return r;
}

// ---- toy training ----------------------------------------------------------------------

InputGeometry ToyConfig::input() const {
  return {single_frame ? 1 : task.frames, task.height, task.width, 1};
}

ToyConfig toy_defaults() {
  ToyConfig c;
  c.model.patch = {1, 4, 4};
  c.model.embed_dim = 16;
  c.model.layers = 2;
  c.model.heads = 2;
  c.model.classes = kDirectionCount;
  c.model.pos_mode = PosMode::kSeparate;
  c.model.attention = AttentionKind::kTrajectory;
  c.task.frames = 8;
  c.task.height = 16;
  c.task.width = 16;
  c.task.dot = 4;
  c.task.speed = 1;
  c.task.noise = 0.1;
  c.train_size = 800;
  c.test_size = 400;
  c.epochs = 8;
  c.batch = 8;
  c.lr = 3e-3;
  c.optimizer = Optimizer::kAdam;
  c.init_std = 0.4;
  return c;
}

ToyConfig stride_sweep_defaults() {
  ToyConfig c = toy_defaults();
  c.task.frames = 4;
  c.task.height = 20;
  c.task.width = 20;
  return c;
}

namespace {

std::string to_string(Optimizer o) { return o == Optimizer::kSgd ? "sgd" : "adam"; }

Optimizer parse_optimizer(const std::string& s) {
  if (s == "sgd") return Optimizer::kSgd;
  if (s == "adam") return Optimizer::kAdam;
  fail(ErrorCode::kConfig, "unknown optimizer '" + s + "'");
}

void only_keys(const json& o, std::initializer_list<const char*> allowed, const char* where) {
  require(o.is_object(), ErrorCode::kConfig,
          [&] { return std::string(where) + " must be a JSON object"; });
  for (auto it = o.begin(); it != o.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    require(ok, ErrorCode::kConfig,
            [&] { return std::string(where) + ": unknown key '" + it.key() + "'"; });
  }
}

}  // namespace

ToyConfig toy_config_from_json(const json& doc, ToyConfig c) {
  try {
    if (doc.contains("model")) {
      json m = to_json(c.model);
      m.update(doc["model"]);
      c.model = model_config_from_json(m);
    }
    require(doc.is_object(), ErrorCode::kConfig, "toy config must be a JSON object");
    only_keys(doc, {"model", "task", "train"}, "toy config");
    if (doc.contains("task")) {
      const json& t = doc["task"];
      only_keys(t, {"frames", "height", "width", "dot", "speed", "stride", "noise"}, "task");
      if (t.contains("frames")) c.task.frames = t["frames"].get<std::size_t>();
      if (t.contains("height")) c.task.height = t["height"].get<std::size_t>();
      if (t.contains("width")) c.task.width = t["width"].get<std::size_t>();
      if (t.contains("dot")) c.task.dot = t["dot"].get<std::size_t>();
      if (t.contains("speed")) c.task.speed = t["speed"].get<std::size_t>();
      if (t.contains("stride")) c.task.stride = t["stride"].get<std::size_t>();
      if (t.contains("noise")) c.task.noise = t["noise"].get<double>();
    }
    if (doc.contains("train")) {
      const json& t = doc["train"];
      only_keys(t, {"train", "test", "epochs", "batch", "lr", "optimizer", "init_std",
                    "single_frame", "seed"},
                "train");
      if (t.contains("train")) c.train_size = t["train"].get<std::size_t>();
      if (t.contains("test")) c.test_size = t["test"].get<std::size_t>();
      if (t.contains("epochs")) c.epochs = t["epochs"].get<std::size_t>();
      if (t.contains("batch")) c.batch = t["batch"].get<std::size_t>();
      if (t.contains("lr")) c.lr = t["lr"].get<double>();
      if (t.contains("init_std")) c.init_std = t["init_std"].get<double>();
      if (t.contains("optimizer")) c.optimizer = parse_optimizer(t["optimizer"].get<std::string>());
      if (t.contains("single_frame")) c.single_frame = t["single_frame"].get<bool>();
      if (t.contains("seed")) c.seed = t["seed"].get<std::uint64_t>();
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("toy config: ") + e.what());
  }
  return c;
}

json to_json(const ToyConfig& c) {
  return {{"model", to_json(c.model)},
          {"task",
           {{"frames", c.task.frames},
            {"height", c.task.height},
            {"width", c.task.width},
            {"dot", c.task.dot},
            {"speed", c.task.speed},
            {"stride", c.task.stride},
            {"noise", c.task.noise}}},
          {"train",
           {{"train", c.train_size},
            {"test", c.test_size},
            {"epochs", c.epochs},
            {"batch", c.batch},
            {"lr", c.lr},
            {"optimizer", to_string(c.optimizer)},
            {"init_std", c.init_std},
            {"single_frame", c.single_frame},
            {"seed", c.seed}}}};
}

namespace {

struct Example {
  Tensor patches;
  std::size_t label;
};

std::vector<Example> make_examples(const ToyConfig& c, std::size_t count, std::uint64_t seed) {
  std::vector<Example> out;
  out.reserve(count);
  for (MovingDotSample& s : gen_moving_dot_set(c.task, count, seed)) {
    const VideoClip clip = c.single_frame ? middle_frame(s.clip) : std::move(s.clip);
    out.push_back({extract_patches(clip, c.model.patch), s.label});
  }
  return out;
}

std::size_t argmax(std::span<const double> xs) {
  return static_cast<std::size_t>(std::max_element(xs.begin(), xs.end()) - xs.begin());
}

double accuracy(const std::vector<Example>& data, const ModelParams& params,
                const ModelConfig& model, GridDims dims) {
  std::size_t hits = 0;
  for (const Example& e : data) {
    Tape tape;
    const BoundParams p = BoundParams::bind(tape, params, false);
    const Tensor logits = forward(tape, e.patches, p, model, dims).value();
    hits += argmax(logits.data()) == e.label;
  }
  return data.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(data.size());
}

class Stepper {
 public:
  Stepper(const ToyConfig& c, const ModelParams& p) : c_(c) {
    for (const Tensor& t : p.values()) {
      m_.emplace_back(t.shape());
      v_.emplace_back(t.shape());
    }
  }

  void apply(ModelParams& params, const std::vector<Tensor>& grads, double inv_batch) {
    ++step_;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t i = 0; i < grads.size(); ++i) {
      auto w = params.values()[i].data();
      auto g = grads[i].data();
      if (c_.optimizer == Optimizer::kSgd) {
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= c_.lr * g[j] * inv_batch;
        continue;
      }
      auto m = m_[i].data();
      auto v = v_[i].data();
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double gj = g[j] * inv_batch;
        m[j] = b1 * m[j] + (1.0 - b1) * gj;
        v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
        w[j] -= c_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
      }
    }
  }

 private:
  const ToyConfig& c_;
  std::vector<Tensor> m_, v_;
  std::size_t step_ = 0;
};

}  // namespace

TrainResult train_toy(const ToyConfig& c) {
  require(c.train_size > 0 && c.batch > 0 && c.lr > 0.0, ErrorCode::kConfig,
          "toy training needs train > 0, batch > 0 and lr > 0");
  const InputGeometry input = c.input();
  const GridDims dims = c.model.grid(input);
  Rng rng(c.seed);
  Rng init_rng = rng.fork(1);
  Rng order_rng = rng.fork(2);
  TrainResult result{ExperimentReport{}, ModelParams::init(c.model, input, init_rng, c.init_std)};
  ExperimentReport& r = result.report;
  r.id = "train-toy";
  r.config = to_json(c);

  const std::vector<Example> train = make_examples(c, c.train_size, splitmix64(c.seed * 2 + 1));
  const std::vector<Example> test = make_examples(c, c.test_size, splitmix64(c.seed * 2 + 2));
  Stepper stepper(c, result.params);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < c.epochs && !result.diverged; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[order_rng.uniform_index(i)]);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t b0 = 0; b0 < order.size() && !result.diverged; b0 += c.batch) {
      const std::size_t b1 = std::min(order.size(), b0 + c.batch);
      std::vector<Tensor> grads;
      for (const Tensor& t : result.params.values()) grads.emplace_back(t.shape());
      for (std::size_t bi = b0; bi < b1; ++bi) {
        const Example& e = train[order[bi]];
        Tape tape;
        const BoundParams p = BoundParams::bind(tape, result.params, true);
        const Var logits = forward(tape, e.patches, p, c.model, dims);
        const Var loss = ad::cross_entropy(logits, e.label);
        const double lv = loss.value()[0];
        if (!std::isfinite(lv)) {
          result.diverged = true;
          break;
        }
        loss_sum += lv;
        hits += argmax(logits.value().data()) == e.label;
        tape.backward(loss);
        for (std::size_t k = 0; k < grads.size(); ++k) {
          auto g = grads[k].data();
          const Tensor gk = tape.grad(p.vars()[k]);
          for (std::size_t j = 0; j < g.size(); ++j) g[j] += gk[j];
        }
      }
      if (!result.diverged) stepper.apply(result.params, grads, 1.0 / static_cast<double>(b1 - b0));
    }
    if (result.diverged) break;
    result.train_accuracy = static_cast<double>(hits) / static_cast<double>(train.size());
    result.test_accuracy = accuracy(test, result.params, c.model, dims);
    r.rows.push_back({{"epoch", epoch},
                      {"train_loss", loss_sum / static_cast<double>(train.size())},
                      {"train_accuracy", result.train_accuracy},
                      {"test_accuracy", result.test_accuracy}});
  }
  if (result.diverged) {
    r.check(false, "training diverged (non-finite loss)");
  } else {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s%s: test accuracy %.3f, train accuracy %.3f",
                  trajattn::to_string(c.model.attention).c_str(),
                  c.single_frame ? " (single frame)" : "", result.test_accuracy,
                  result.train_accuracy);
    r.summary.push_back(buf);
  }
  r.extra["test_accuracy"] = result.test_accuracy;
  r.extra["diverged"] = result.diverged;
  r.aggregate_rows({}, {"test_accuracy", "train_accuracy", "train_loss"});
  return result;
}

ExperimentReport stride_sweep(const ToyConfig& base, std::span<const std::size_t> strides,
                              std::size_t seeds, std::span<const AttentionKind> kinds_in) {
  std::vector<AttentionKind> kinds(kinds_in.begin(), kinds_in.end());
  if (kinds.empty())
    kinds = {AttentionKind::kJoint, AttentionKind::kDivided, AttentionKind::kTrajectory};
  require(!strides.empty() && seeds >= 1, ErrorCode::kConfig,
          "stride sweep needs at least one stride and one seed");
  ExperimentReport r;
  r.id = "stride-sweep";
  r.config = to_json(base);
  r.config["strides"] = std::vector<std::size_t>(strides.begin(), strides.end());
  r.config["seeds"] = seeds;
  std::map<std::pair<std::size_t, AttentionKind>, std::vector<double>> acc;
  for (std::size_t stride : strides) {
    for (AttentionKind kind : kinds) {
      for (std::size_t s = 0; s < seeds; ++s) {
        ToyConfig c = base;
        c.task.stride = stride;
        c.model.attention = kind;
        c.seed = base.seed + s;
        const TrainResult t = train_toy(c);
        acc[{stride, kind}].push_back(t.test_accuracy);
        r.rows.push_back({{"stride", stride},
                          {"kind", trajattn::to_string(kind)},
                          {"seed", c.seed},
                          {"test_accuracy", t.test_accuracy},
                          {"diverged", t.diverged}});
        if (t.diverged) r.check(false, "diverged at stride " + std::to_string(stride));
      }
    }
  }
  r.aggregate_rows({"stride", "kind"}, {"test_accuracy"});
  const bool has_traj = std::find(kinds.begin(), kinds.end(), AttentionKind::kTrajectory) != kinds.end();
  json margins = json::array();
  if (has_traj) {
    for (std::size_t stride : strides) {
      const double traj = aggregate(acc[{stride, AttentionKind::kTrajectory}]).mean;
      json m{{"stride", stride}};
      for (AttentionKind kind : kinds) {
        if (kind == AttentionKind::kTrajectory) continue;
        m["vs_" + trajattn::to_string(kind)] = traj - aggregate(acc[{stride, kind}]).mean;
      }
      margins.push_back(m);
    }
    r.extra["margins"] = margins;
    for (const json& m : margins) {
      std::string line = "stride " + std::to_string(m["stride"].get<std::size_t>()) + ":";
      for (auto it = m.begin(); it != m.end(); ++it) {
        if (it.key() == "stride") continue;
        char buf[64];
        std::snprintf(buf, sizeof buf, " %s %+.3f", it.key().c_str(), it.value().get<double>());
        line += buf;
      }
      r.summary.push_back(line);
    }
  }
  return r;
}

TrajectoryIntermediate head_averaged_maps(const VideoClip& clip, const ModelParams& params,
                                          const ModelConfig& config, std::size_t layer) {
  ForwardTrace trace;
  forward(clip, params, config, &trace);
  require(layer < trace.maps.size() && !trace.maps[layer].empty(), ErrorCode::kConfig,
          "no stage-one maps recorded; the attention kind must be exact trajectory");
  const std::vector<Tensor>& heads = trace.maps[layer];
  Tensor avg(heads.front().shape());
  for (const Tensor& h : heads)
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += h[i] / static_cast<double>(heads.size());
  const GridDims dims = config.grid(clip.geometry());
  return {std::move(avg), Tensor({1}), dims};
}

ExperimentReport dump_attn(const ToyConfig& config, std::size_t clips, std::ostream* csv) {
  ToyConfig c = config;
  c.model.attention = AttentionKind::kTrajectory;
  c.single_frame = false;
  const TrainResult trained = train_toy(c);
  ExperimentReport r;
  r.id = "dump-attn";
  r.config = to_json(c);
  r.config["clips"] = clips;
  r.extra["training"] = trained.report.to_json();
  if (trained.diverged) {
    r.check(false, "training diverged");
    return r;
  }
  MovingDotSpec spec = c.task;
  spec.noise = 0.0;
  const std::vector<MovingDotSample> samples = gen_moving_dot_set(spec, clips, splitmix64(c.seed + 77));
  const std::size_t gw = spec.width / c.model.patch.w;
  const std::size_t ph = c.model.patch.h, pw = c.model.patch.w;
  auto overlaps = [&](std::size_t s, const DotPosition& p) {
    const std::size_t y0 = (s / gw) * ph, x0 = (s % gw) * pw;
    return p.y < y0 + ph && y0 < p.y + spec.dot && p.x < x0 + pw && x0 < p.x + spec.dot;
  };
  std::size_t hits = 0, total = 0;
  for (std::size_t ci = 0; ci < samples.size(); ++ci) {
    const MovingDotSample& smp = samples[ci];
    const TrajectoryIntermediate inter = head_averaged_maps(smp.clip, trained.params, c.model);
    if (ci == 0 && csv) write_attention_csv(*csv, inter);
    const GridDims dims = inter.dims;
    const std::size_t t_ref = dims.T / 2;
    const DotPosition& ref = smp.positions[t_ref * c.model.patch.t];
    const std::size_t s_ref = (ref.y / ph) * gw + ref.x / pw;
    const std::size_t i = dims.index(s_ref, t_ref);
    std::size_t clip_hits = 0;
    for (std::size_t tp = 0; tp < dims.T; ++tp) {
      std::span<const double> row = inter.maps.data().subspan((i * dims.T + tp) * dims.S, dims.S);
      const std::size_t best = argmax(row);
      const bool hit = overlaps(best, smp.positions[tp * c.model.patch.t]);
      clip_hits += hit;
    }
    hits += clip_hits;
    total += dims.T;
    r.rows.push_back({{"clip", ci},
                      {"label", to_string(static_cast<Direction>(smp.label))},
                      {"query_s", s_ref},
                      {"query_t", t_ref},
                      {"tracking_rate", static_cast<double>(clip_hits) / static_cast<double>(dims.T)}});
  }
  const double rate = total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
  r.extra["tracking_rate"] = rate;
  r.extra["test_accuracy"] = trained.test_accuracy;
  r.aggregate_rows({}, {"tracking_rate"});
  char buf[128];
  std::snprintf(buf, sizeof buf, "argmax tracks the dot in %.1f%% of frames (test accuracy %.3f)",
                100.0 * rate, trained.test_accuracy);
  r.check(rate >= 0.9, buf);
  return r;
}

}  // namespace trajattn
