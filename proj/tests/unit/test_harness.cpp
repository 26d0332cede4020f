// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "harness/commands.hpp"
#include "harness/experiments.hpp"
#include "harness/moving_dot.hpp"
#include "test_util.hpp"

using namespace trajattn;
using testing::code;
using testing::error_code_of;

namespace {

// Small enough to train in well under a second.
ToyConfig tiny_toy() {
  ToyConfig c = toy_defaults();
  c.train_size = 16;
  c.test_size = 8;
  c.epochs = 1;
  return c;
}

}  // namespace

TEST_SUITE("moving_dot") {
  TEST_CASE("speed zero and paths off the canvas are rejected") {
    MovingDotSpec spec;
    spec.speed = 0;
    CHECK(error_code_of([&] { spec.validate(); }) == code(ErrorCode::kConfig));
    spec.speed = 1;
    spec.stride = 3;
    spec.frames = 8;
    spec.width = 16;
    CHECK(error_code_of([&] { spec.validate(); }) == code(ErrorCode::kConfig));
    Rng rng(1);
    CHECK(error_code_of([&] { gen_moving_dot(spec, rng); }) == code(ErrorCode::kConfig));
  }

  TEST_CASE("noise-free dot moving right shifts one column per frame") {
    MovingDotSpec spec;
    spec.noise = 0.0;
    spec.dot = 2;
    spec.direction = Direction::kRight;
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const MovingDotSample s = gen_moving_dot(spec, rng);
      CHECK(s.label == static_cast<std::size_t>(Direction::kRight));
      REQUIRE(s.positions.size() == spec.frames);
      const Tensor& f = s.clip.frames;
      for (std::size_t t = 0; t < spec.frames; ++t) {
        CHECK(s.positions[t].y == s.positions[0].y);
        CHECK(s.positions[t].x == s.positions[0].x + t);
        for (std::size_t y = 0; y < spec.height; ++y)
          for (std::size_t x = 0; x < spec.width; ++x) {
            const bool in = y >= s.positions[t].y && y < s.positions[t].y + spec.dot &&
                            x >= s.positions[t].x && x < s.positions[t].x + spec.dot;
            CHECK(f[(t * spec.height + y) * spec.width + x] == (in ? 1.0 : 0.0));
          }
      }
    }
  }

  TEST_CASE("stride multiplies the step") {
    MovingDotSpec spec;
    spec.frames = 4;
    spec.height = spec.width = 20;
    spec.stride = 3;
    spec.direction = Direction::kUp;
    Rng rng(3);
    const MovingDotSample s = gen_moving_dot(spec, rng);
    for (std::size_t t = 1; t < spec.frames; ++t)
      CHECK(s.positions[t - 1].y - s.positions[t].y == 3);
  }

  TEST_CASE("labels are balanced and the set is reproducible") {
    MovingDotSpec spec;
    const auto a = gen_moving_dot_set(spec, 4000, 9);
    std::array<std::size_t, kDirectionCount> counts{};
    for (const auto& s : a) ++counts[s.label];
    for (std::size_t c : counts) CHECK(c == 1000);
    const auto b = gen_moving_dot_set(spec, 40, 9);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(identical(a[i].clip.frames, b[i].clip.frames));
    const auto c = gen_moving_dot_set(spec, 4, 10);
    CHECK_FALSE(identical(a[0].clip.frames, c[0].clip.frames));
  }

  TEST_CASE("middle frame") {
    MovingDotSpec spec;
    Rng rng(4);
    const MovingDotSample s = gen_moving_dot(spec, rng);
    const VideoClip m = middle_frame(s.clip);
    CHECK(m.frames.shape() == Shape{1, 1, spec.height, spec.width});
    const std::size_t plane = spec.height * spec.width;
    for (std::size_t i = 0; i < plane; ++i) CHECK(m.frames[i] == s.clip.frames[4 * plane + i]);
  }
}

TEST_SUITE("reports") {
  TEST_CASE("aggregate and slope") {
    const std::vector<double> xs{1.0, 2.0, 3.0, 6.0};
    const Aggregate a = aggregate(xs);
    CHECK(a.n == 4);
    CHECK(a.mean == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(a.std == doctest::Approx(std::sqrt(14.0 / 3.0)).epsilon(1e-14));
    CHECK(aggregate(std::vector<double>{5.0}).std == 0.0);
    const std::vector<double> n{8, 16, 32, 64}, y{3 * 64.0, 3 * 256.0, 3 * 1024.0, 3 * 4096.0};
    CHECK(std::abs(loglog_slope(n, y) - 2.0) <= 1e-12);
  }

  TEST_CASE("aggregates can be recomputed from rows") {
    ApproxSweepSpec spec;
    spec.Ns = {16};
    spec.Rs = {2, 4};
    spec.seeds = 5;
    const ExperimentReport r = approx_sweep(spec);
    std::map<std::string, std::vector<double>> groups;
    for (const json& row : r.rows)
      groups[row["method"].get<std::string>() + "/" + row["strategy"].get<std::string>() + "/" +
             std::to_string(row["N"].get<std::size_t>()) + "/" +
             std::to_string(row["R"].get<std::size_t>())]
          .push_back(row["rel_frobenius_error"].get<double>());
    CHECK(groups.size() == r.aggregates.size());
    for (const auto& [key, errs] : groups) {
      INFO(key);
      REQUIRE(r.aggregates.contains(key));
      const json& agg = r.aggregates[key]["rel_frobenius_error"];
      const Aggregate a = aggregate(errs);
      CHECK(agg["n"].get<std::size_t>() == errs.size());
      CHECK(std::abs(agg["mean"].get<double>() - a.mean) <= 1e-12);
      CHECK(std::abs(agg["std"].get<double>() - a.std) <= 1e-12);
    }
  }

  TEST_CASE("identical keys are reproduced exactly") {
    ApproxSweepSpec spec;
    spec.Ns = {16};
    spec.Rs = {1, 4, 16};
    spec.seeds = 3;
    spec.inputs = SweepInputs::kIdenticalKeys;
    spec.methods = {AttentionMethod::kOrthoformer, AttentionMethod::kExact};
    for (const json& row : approx_sweep(spec).rows)
      CHECK(row["rel_frobenius_error"].get<double>() <= 1e-12);
  }
}

TEST_SUITE("commands") {
  TEST_CASE("unknown commands and options are rejected") {
    CHECK(error_code_of([] { run_command("nope", json::object()); }) != 0);
    for (const std::string& name : command_names()) {
      INFO(name);
      CHECK(error_code_of([&] { run_command(name, {{"no_such_option", 1}}); }) ==
            code(ErrorCode::kConfig));
    }
    CHECK(error_code_of([] {
            run_command("train-toy", {{"config", {{"train", {{"train_size", 10}}}}}});
          }) == code(ErrorCode::kConfig));
  }

  TEST_CASE("same options give the same csv") {
    const json gc{{"targets", {"joint", "cls"}}, {"seed", 5}};
    CHECK(run_command("gradcheck", gc).csv == run_command("gradcheck", gc).csv);
    const json sweep{{"N", {16}}, {"R", {2}}, {"seeds", 2}};
    const std::string a = run_command("approx-sweep", sweep).report["rows"].dump();
    CHECK(a.find("rel_frobenius_error") != std::string::npos);
  }

  TEST_CASE("flops with a custom config") {
    const CommandOutput out = run_command(
        "flops", {{"config", to_json(vit_base({2, 16, 16}, AttentionKind::kJoint))},
                  {"input", {16, 224, 224, 3}}});
    CHECK(out.report.contains("totals"));
    CHECK(out.csv.find("total,all,") != std::string::npos);
  }
}

TEST_SUITE("toy") {
  TEST_CASE("config json round trip") {
    ToyConfig c = toy_defaults();
    c.model.attention = AttentionKind::kDivided;
    c.task.stride = 2;
    c.epochs = 3;
    c.optimizer = Optimizer::kSgd;
    const ToyConfig back = toy_config_from_json(to_json(c), ToyConfig{});
    CHECK(to_json(back) == to_json(c));
    CHECK(error_code_of([] { toy_config_from_json({{"task", {{"colour", 1}}}}); }) ==
          code(ErrorCode::kConfig));
  }

  TEST_CASE("training is reproducible") {
    const ToyConfig c = tiny_toy();
    const TrainResult a = train_toy(c);
    const TrainResult b = train_toy(c);
    CHECK(a.report.rows.size() == c.epochs);
    CHECK(json(a.report.rows).dump() == json(b.report.rows).dump());
    REQUIRE(a.params.count() == b.params.count());
    for (std::size_t i = 0; i < a.params.count(); ++i)
      CHECK(identical(a.params.values()[i], b.params.values()[i]));
    CHECK_FALSE(a.diverged);
  }

  TEST_CASE("single stride gives one margin row") {
    ToyConfig c = stride_sweep_defaults();
    c.train_size = 16;
    c.test_size = 8;
    c.epochs = 1;
    const std::vector<std::size_t> strides{2};
    const ExperimentReport r = stride_sweep(c, strides, 1);
    REQUIRE(r.extra["margins"].size() == 1);
    const json& m = r.extra["margins"][0];
    CHECK(m["stride"].get<std::size_t>() == 2);
    CHECK(m.contains("vs_joint"));
    CHECK(m.contains("vs_divided"));
    CHECK(r.rows.size() == 3);
  }

  TEST_CASE("attention dump") {
    std::ostringstream csv;
    const ExperimentReport r = dump_attn(tiny_toy(), 2, &csv);
    CHECK(csv.str().rfind("s,t,t_prime,s_prime,weight\n", 0) == 0);
    CHECK(r.extra.contains("tracking_rate"));
    const double rate = r.extra["tracking_rate"].get<double>();
    CHECK(rate >= 0.0);
    CHECK(rate <= 1.0);
  }

  // Known red: after default training the layer-0 maps track the dot in
  // roughly 35-47% of frames although test accuracy is about 98%. should_fail
  // keeps the 90% bar and flags the case if it ever starts passing.
  TEST_CASE("trained maps track the dot" * doctest::should_fail()) {
    const ExperimentReport r = dump_attn(toy_defaults(), 16, nullptr);
    CHECK(r.extra["test_accuracy"].get<double>() >= 0.85);
    CHECK(r.extra["tracking_rate"].get<double>() >= 0.9);
  }
}
