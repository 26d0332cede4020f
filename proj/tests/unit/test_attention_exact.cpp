// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "attention/exact.hpp"
#include "core/gradcheck.hpp"
#include "doctest.h"
#include "frozen.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace trajattn;
using testing::make;
using testing::max_diff;

namespace {

struct Qkv {
  Tensor q, k, v;
};

Qkv random_qkv(Rng& rng, std::size_t n, std::size_t d) {
  return {rng.normal_tensor({n, d}), rng.normal_tensor({n, d}), rng.normal_tensor({n, d})};
}

GridDims random_grid(Rng& rng) {
  return {1 + rng.uniform_index(4), 1 + rng.uniform_index(4)};
}

QkvProjections random_projections(Rng& rng, std::size_t d) {
  QkvProjections p;
  p.wq = rng.normal_tensor({d, d});
  p.wk = rng.normal_tensor({d, d});
  p.wv = rng.normal_tensor({d, d});
  p.wq2 = rng.normal_tensor({d, d});
  p.wk2 = rng.normal_tensor({d, d});
  p.wv2 = rng.normal_tensor({d, d});
  return p;
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& from) {
  return gather_rows(x, from);
}

}  // namespace

TEST_SUITE("joint_attention") {
  TEST_CASE("single key returns v") {
    Rng rng(1);
    const Qkv a = random_qkv(rng, 1, 5);
    CHECK(max_diff(joint_attention(a.q, a.k, a.v, 0.3), a.v) == 0.0);
  }

  TEST_CASE("identical keys average the values") {
    Rng rng(2);
    Qkv a = random_qkv(rng, 6, 3);
    for (std::size_t i = 1; i < 6; ++i)
      for (std::size_t c = 0; c < 3; ++c) a.k.at(i, c) = a.k.at(0, c);
    const Tensor y = joint_attention(a.q, a.k, a.v, 0.5);
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (std::size_t j = 0; j < 6; ++j) mean += a.v.at(j, c) / 6.0;
      for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(y.at(i, c) - mean) <= 1e-12);
    }
  }

  TEST_CASE("frozen N=4, D=3") {
    const Tensor y = joint_attention(make({4, 3}, frozen::kJointQ), make({4, 3}, frozen::kJointK),
                                     make({4, 3}, frozen::kJointV), 1.0 / std::sqrt(3.0));
    CHECK(max_diff(y, make({4, 3}, frozen::kJointOut)) <= 1e-12);
  }

  TEST_CASE("loop oracle, convex hull and permutation equivariance") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + rng.uniform_index(16), d = 1 + rng.uniform_index(8);
      const Qkv a = random_qkv(rng, n, d);
      const double scale = default_scale(d);
      const Tensor y = joint_attention(a.q, a.k, a.v, scale);
      CHECK(max_diff(y, oracle::joint(a.q, a.k, a.v, scale)) <= 1e-12);
      for (std::size_t c = 0; c < d; ++c) {
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t j = 0; j < n; ++j) {
          lo = std::min(lo, a.v.at(j, c));
          hi = std::max(hi, a.v.at(j, c));
        }
        for (std::size_t i = 0; i < n; ++i) {
          CHECK(y.at(i, c) >= lo - 1e-12);
          CHECK(y.at(i, c) <= hi + 1e-12);
        }
      }
      const auto pi = rng.sample_without_replacement(n, n);
      const Tensor yp = joint_attention(permute_rows(a.q, pi), permute_rows(a.k, pi),
                                        permute_rows(a.v, pi), scale);
      CHECK(max_diff(yp, permute_rows(y, pi)) <= 1e-12);
    }
  }

  TEST_CASE("shape mismatch") {
    CHECK(testing::error_code_of([] {
            joint_attention(Tensor::zeros({3, 2}), Tensor::zeros({4, 2}), Tensor::zeros({3, 2}), 1.0);
          }) == testing::code(ErrorCode::kShapeMismatch));
  }
}

TEST_SUITE("divided attention") {
  TEST_CASE("collapses to joint on one frame or one location") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 1 + rng.uniform_index(6), d = 1 + rng.uniform_index(5);
      const Qkv a = random_qkv(rng, n, d);
      const Tensor joint = joint_attention(a.q, a.k, a.v, 0.7);
      CHECK(max_diff(divided_space_attention({n, 1}, a.q, a.k, a.v, 0.7), joint) <= 1e-12);
      CHECK(max_diff(divided_time_attention({1, n}, a.q, a.k, a.v, 0.7), joint) <= 1e-12);
    }
  }

  TEST_CASE("frozen S=2, T=2") {
    const Tensor q = make({4, 2}, frozen::kGridQ), k = make({4, 2}, frozen::kGridK),
                 v = make({4, 2}, frozen::kGridV);
    const double scale = 1.0 / std::sqrt(2.0);
    CHECK(max_diff(divided_space_attention({2, 2}, q, k, v, scale),
                   make({4, 2}, frozen::kDividedSpace)) <= 1e-12);
    CHECK(max_diff(divided_time_attention({2, 2}, q, k, v, scale),
                   make({4, 2}, frozen::kDividedTime)) <= 1e-12);
  }

  TEST_CASE("slice oracles") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      const GridDims g = random_grid(rng);
      const std::size_t d = 1 + rng.uniform_index(8);
      const Qkv a = random_qkv(rng, g.tokens(), d);
      const double scale = default_scale(d);
      CHECK(max_diff(divided_space_attention(g, a.q, a.k, a.v, scale),
                     oracle::divided_space(g, a.q, a.k, a.v, scale)) <= 1e-12);
      CHECK(max_diff(divided_time_attention(g, a.q, a.k, a.v, scale),
                     oracle::divided_time(g, a.q, a.k, a.v, scale)) <= 1e-12);
    }
  }

  TEST_CASE("token count must match the grid") {
    CHECK(testing::error_code_of([] {
            const Tensor x = Tensor::zeros({5, 2});
            divided_space_attention({2, 2}, x, x, x, 1.0);
          }) == testing::code(ErrorCode::kShapeMismatch));
  }
}

TEST_SUITE("trajectory_stage1") {
  TEST_CASE("equal keys within a frame pool the frame mean") {
    Rng rng(6);
    const GridDims g{3, 2};
    Qkv a = random_qkv(rng, 6, 4);
    for (std::size_t t = 0; t < g.T; ++t)
      for (std::size_t s = 1; s < g.S; ++s)
        for (std::size_t c = 0; c < 4; ++c) a.k.at(g.index(s, t), c) = a.k.at(g.index(0, t), c);
    const TrajectoryIntermediate r =
        trajectory_stage1(g, a.q, a.k, a.v, 0.5, NormMode::kSpatialPerFrame);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t tp = 0; tp < g.T; ++tp)
        for (std::size_t c = 0; c < 4; ++c) {
          double mean = 0.0;
          for (std::size_t s = 0; s < g.S; ++s) mean += a.v.at(g.index(s, tp), c) / 3.0;
          CHECK(std::abs(r.tokens[(i * g.T + tp) * 4 + c] - mean) <= 1e-12);
        }
  }

  TEST_CASE("one frame collapses to divided space attention") {
    Rng rng(7);
    const Qkv a = random_qkv(rng, 5, 3);
    const TrajectoryIntermediate r =
        trajectory_stage1({5, 1}, a.q, a.k, a.v, 0.6, NormMode::kSpatialPerFrame);
    CHECK(max_diff(r.tokens.reshaped({5, 3}),
                   divided_space_attention({5, 1}, a.q, a.k, a.v, 0.6)) <= 1e-12);
  }

  TEST_CASE("frozen S=2, T=2") {
    const TrajectoryIntermediate r =
        trajectory_stage1({2, 2}, make({4, 2}, frozen::kGridQ), make({4, 2}, frozen::kGridK),
                          make({4, 2}, frozen::kGridV), 1.0 / std::sqrt(2.0),
                          NormMode::kSpatialPerFrame);
    REQUIRE(r.maps.shape() == Shape{4, 2, 2});
    REQUIRE(r.tokens.shape() == Shape{4, 2, 2});
    CHECK(max_diff(r.maps, make({4, 2, 2}, frozen::kStage1Maps)) <= 1e-12);
    CHECK(max_diff(r.tokens, make({4, 2, 2}, frozen::kStage1Tokens)) <= 1e-12);
  }

  TEST_CASE("loop oracle in both normalisations, with stochastic maps") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
      const GridDims g = random_grid(rng);
      const std::size_t d = 1 + rng.uniform_index(8);
      const Qkv a = random_qkv(rng, g.tokens(), d);
      for (bool st : {false, true}) {
        const TrajectoryIntermediate r = trajectory_stage1(
            g, a.q, a.k, a.v, default_scale(d), st ? NormMode::kSpaceTime : NormMode::kSpatialPerFrame);
        const oracle::Stage1 o = oracle::stage1(g, a.q, a.k, a.v, default_scale(d), st);
        CHECK(max_diff(r.maps, o.maps) <= 1e-12);
        CHECK(max_diff(r.tokens, o.tokens) <= 1e-12);
        for (std::size_t i = 0; i < g.tokens(); ++i) {
          double all = 0.0;
          for (std::size_t tp = 0; tp < g.T; ++tp) {
            double frame = 0.0;
            for (std::size_t s = 0; s < g.S; ++s) frame += r.maps[(i * g.T + tp) * g.S + s];
            if (!st) CHECK(std::abs(frame - 1.0) <= 1e-10);
            all += frame;
          }
          if (st) CHECK(std::abs(all - 1.0) <= 1e-10);
        }
      }
    }
  }

  TEST_CASE("spatial permutation equivariance") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
      const GridDims g{2 + rng.uniform_index(3), 1 + rng.uniform_index(4)};
      const std::size_t d = 1 + rng.uniform_index(6);
      const Qkv a = random_qkv(rng, g.tokens(), d);
      const std::size_t f = rng.uniform_index(g.T);
      const auto pi = rng.sample_without_replacement(g.S, g.S);
      // Row (s, f) of the permuted field is row (pi[s], f) of the original.
      std::vector<std::size_t> from(g.tokens());
      std::iota(from.begin(), from.end(), std::size_t{0});
      for (std::size_t s = 0; s < g.S; ++s) from[g.index(s, f)] = g.index(pi[s], f);
      const auto base = trajectory_stage1(g, a.q, a.k, a.v, 0.5, NormMode::kSpatialPerFrame);
      const auto perm = trajectory_stage1(g, permute_rows(a.q, from), permute_rows(a.k, from),
                                          permute_rows(a.v, from), 0.5, NormMode::kSpatialPerFrame);
      const Tensor bt = base.tokens.reshaped({g.tokens(), g.T * d});
      const Tensor pt = perm.tokens.reshaped({g.tokens(), g.T * d});
      // Reference tokens of frame f move with pi; all others see frame f as a
      // permuted set and pool the same value.
      CHECK(max_diff(pt, permute_rows(bt, from)) <= 1e-12);
    }
  }

  TEST_CASE("frozen video gives the same map for every frame") {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t S = 1 + rng.uniform_index(5), T = 2 + rng.uniform_index(3), d = 3;
      const Qkv one = random_qkv(rng, S, d);
      std::vector<Tensor> qs(T, one.q), ks(T, one.k), vs(T, one.v);
      const Tensor q = concat_rows(qs), k = concat_rows(ks), v = concat_rows(vs);
      const auto r = trajectory_stage1({S, T}, q, k, v, 0.5, NormMode::kSpatialPerFrame);
      const auto single = trajectory_stage1({S, 1}, one.q, one.k, one.v, 0.5,
                                            NormMode::kSpatialPerFrame);
      for (std::size_t i = 0; i < S * T; ++i)
        for (std::size_t tp = 0; tp < T; ++tp)
          for (std::size_t s = 0; s < S; ++s)
            CHECK(std::abs(r.maps[(i * T + tp) * S + s] - single.maps[(i % S) * S + s]) <= 1e-12);
    }
  }
}

TEST_SUITE("trajectory_stage2") {
  TEST_CASE("one frame puts all temporal weight on it") {
    Rng rng(11);
    const std::size_t S = 4, d = 3;
    const Qkv a = random_qkv(rng, S, d);
    const QkvProjections p = random_projections(rng, d);
    const auto inter = trajectory_stage1({S, 1}, a.q, a.k, a.v, 0.5, NormMode::kSpatialPerFrame);
    const Tensor y = trajectory_stage2(inter, p, 0.5, TemporalMode::kAttention);
    const Tensor expected =
        matmul_nt(divided_space_attention({S, 1}, a.q, a.k, a.v, 0.5), p.wv2);
    CHECK(max_diff(y, expected) <= 1e-12);
  }

  TEST_CASE("average of two frames") {
    // Two tokens with two trajectory slots each; the average ignores projections.
    TrajectoryIntermediate two{Tensor({2, 2, 1}), make({2, 2, 3}, {1, 2, 3, 5, -4, 0, 0, 0, 0, 2, 2, 2}),
                               GridDims{1, 2}};
    const Tensor y = trajectory_stage2(two, QkvProjections::identity(3), 1.0, TemporalMode::kAverage);
    CHECK(max_diff(y, make({2, 3}, {3, -1, 1.5, 1, 1, 1})) <= 1e-15);
  }

  TEST_CASE("frozen S=2, T=3 with identity projections") {
    const GridDims g{2, 3};
    const double scale = 1.0 / std::sqrt(2.0);
    const auto inter = trajectory_stage1(g, make({6, 2}, frozen::kS2Q), make({6, 2}, frozen::kS2K),
                                         make({6, 2}, frozen::kS2V), scale, NormMode::kSpatialPerFrame);
    const Tensor y = trajectory_stage2(inter, QkvProjections::identity(2), scale,
                                       TemporalMode::kAttention);
    CHECK(max_diff(y, make({6, 2}, frozen::kS2Out)) <= 1e-12);
  }

  TEST_CASE("loop oracle") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
      const GridDims g = random_grid(rng);
      const std::size_t d = 1 + rng.uniform_index(6);
      const Qkv a = random_qkv(rng, g.tokens(), d);
      const QkvProjections p = random_projections(rng, d);
      const auto inter = trajectory_stage1(g, a.q, a.k, a.v, 0.4, NormMode::kSpatialPerFrame);
      for (bool avg : {false, true}) {
        const Tensor y = trajectory_stage2(inter, p, 0.4,
                                           avg ? TemporalMode::kAverage : TemporalMode::kAttention);
        CHECK(max_diff(y, oracle::stage2(g, inter.tokens, p.wq2, p.wk2, p.wv2, 0.4, avg)) <= 1e-12);
      }
    }
  }
}

TEST_SUITE("trajectory_attention") {
  TEST_CASE("frozen S=2, T=2, D=2 pipeline") {
    QkvProjections p;
    p.wq = make({2, 2}, frozen::kPipeWq);
    p.wk = make({2, 2}, frozen::kPipeWk);
    p.wv = make({2, 2}, frozen::kPipeWv);
    p.wq2 = make({2, 2}, frozen::kPipeWq2);
    p.wk2 = make({2, 2}, frozen::kPipeWk2);
    p.wv2 = make({2, 2}, frozen::kPipeWv2);
    const TokenGrid grid(make({4, 2}, frozen::kPipeZ), {2, 2});
    const Tensor y = trajectory_attention(grid, p, AttentionConfig{});
    CHECK(max_diff(y, make({4, 2}, frozen::kPipeOut)) <= 1e-12);
  }

  TEST_CASE("monolithic oracle for every variant") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
      const GridDims g = random_grid(rng);
      const std::size_t d = 1 + rng.uniform_index(8);
      const TokenGrid grid(rng.normal_tensor({g.tokens(), d}), g);
      const QkvProjections p = random_projections(rng, d);
      for (bool st : {false, true})
        for (bool avg : {false, true}) {
          AttentionConfig cfg;
          cfg.norm = st ? NormMode::kSpaceTime : NormMode::kSpatialPerFrame;
          cfg.temporal = avg ? TemporalMode::kAverage : TemporalMode::kAttention;
          CHECK(max_diff(trajectory_attention(grid, p, cfg),
                         oracle::trajectory(g, grid.tokens, p, default_scale(d), st, avg)) <= 1e-12);
        }
    }
  }

  TEST_CASE("the three ablation variants differ on generic inputs") {
    Rng rng(14);
    for (int trial = 0; trial < 20; ++trial) {
      const GridDims g{4, 3};
      const std::size_t d = 4;
      const TokenGrid grid(rng.normal_tensor({g.tokens(), d}), g);
      const QkvProjections p = random_projections(rng, d);
      AttentionConfig s_att, st_att, s_avg;
      st_att.norm = NormMode::kSpaceTime;
      s_avg.temporal = TemporalMode::kAverage;
      const Tensor a = trajectory_attention(grid, p, s_att);
      const Tensor b = trajectory_attention(grid, p, st_att);
      const Tensor c = trajectory_attention(grid, p, s_avg);
      CHECK(max_diff(a, b) > 1e-6);
      CHECK(max_diff(a, c) > 1e-6);
      CHECK(max_diff(b, c) > 1e-6);
    }
  }

  TEST_CASE("one frame equals projected divided space attention") {
    Rng rng(15);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t S = 1 + rng.uniform_index(6), d = 1 + rng.uniform_index(5);
      const TokenGrid grid(rng.normal_tensor({S, d}), {S, 1});
      const QkvProjections p = random_projections(rng, d);
      const Tensor q = matmul_nt(grid.tokens, p.wq), k = matmul_nt(grid.tokens, p.wk),
                   v = matmul_nt(grid.tokens, p.wv);
      const Tensor expected =
          matmul_nt(divided_space_attention({S, 1}, q, k, v, default_scale(d)), p.wv2);
      CHECK(max_diff(trajectory_attention(grid, p, AttentionConfig{}), expected) <= 1e-12);
    }
  }

  TEST_CASE("projection shapes are validated") {
    QkvProjections p = QkvProjections::identity(3);
    p.wk2 = Tensor::zeros({3, 2});
    CHECK(testing::error_code_of([&] { p.validate(3); }) ==
          testing::code(ErrorCode::kShapeMismatch));
  }
}

TEST_SUITE("cls_attention") {
  TEST_CASE("attends over the grid and itself") {
    Rng rng(16);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 1 + rng.uniform_index(8), d = 1 + rng.uniform_index(5);
      const Qkv a = random_qkv(rng, n, d);
      const Tensor qc = rng.normal_tensor({1, d}), kc = rng.normal_tensor({1, d}),
                   vc = rng.normal_tensor({1, d});
      const std::vector<Tensor> ks{kc, a.k}, vs{vc, a.v};
      const Tensor expected = oracle::joint(qc, concat_rows(ks), concat_rows(vs), 0.5);
      CHECK(max_diff(cls_attention(qc, a.k, a.v, kc, vc, 0.5), expected) <= 1e-12);
    }
  }
}

TEST_SUITE("tape kernels") {
  TEST_CASE("values match the tensor kernels") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
      const GridDims g = random_grid(rng);
      const std::size_t d = 1 + rng.uniform_index(5);
      const Qkv a = random_qkv(rng, g.tokens(), d);
      const QkvProjections p = random_projections(rng, d);
      Tape tape;
      const Var q = tape.leaf(a.q), k = tape.leaf(a.k), v = tape.leaf(a.v);
      CHECK(max_diff(attn::joint(q, k, v, 0.5).value(), joint_attention(a.q, a.k, a.v, 0.5)) <=
            1e-12);
      CHECK(max_diff(attn::divided_space(q, k, v, g, 0.5).value(),
                     divided_space_attention(g, a.q, a.k, a.v, 0.5)) <= 1e-12);
      CHECK(max_diff(attn::divided_time(q, k, v, g, 0.5).value(),
                     divided_time_attention(g, a.q, a.k, a.v, 0.5)) <= 1e-12);
      for (NormMode norm : {NormMode::kSpatialPerFrame, NormMode::kSpaceTime})
        for (TemporalMode tm : {TemporalMode::kAttention, TemporalMode::kAverage}) {
          const attn::Stage1 s1 = attn::trajectory_stage1(q, k, v, g, 0.5, norm);
          const TrajectoryIntermediate ref = trajectory_stage1(g, a.q, a.k, a.v, 0.5, norm);
          const TrajectoryIntermediate got = to_intermediate(s1);
          CHECK(max_diff(got.maps, ref.maps) <= 1e-12);
          CHECK(max_diff(got.tokens, ref.tokens) <= 1e-12);
          const Var y = attn::trajectory_stage2(s1, tape.leaf(p.wq2), tape.leaf(p.wk2),
                                                tape.leaf(p.wv2), 0.5, tm);
          CHECK(max_diff(y.value(), trajectory_stage2(ref, p, 0.5, tm)) <= 1e-12);
        }
    }
  }

  TEST_CASE("gradients match central differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(100 + seed);
      const GridDims g{3, 2};
      const std::size_t d = 3;
      std::vector<Tensor> in{rng.normal_tensor({6, d}), rng.normal_tensor({6, d}),
                             rng.normal_tensor({6, d}), rng.normal_tensor({d, d}),
                             rng.normal_tensor({d, d}), rng.normal_tensor({d, d})};
      const Tensor w = rng.normal_tensor({6, d});
      auto check = [&](const char* name, auto kernel) {
        const double err =
            gradcheck([&](Tape&, std::span<const Var> v) { return ad::weighted_sum(kernel(v), w); },
                      in)
                .max_relative_error;
        INFO(name);
        CHECK(err < 1e-4);
      };
      check("joint", [&](auto v) { return attn::joint(v[0], v[1], v[2], 0.6); });
      check("divided_space", [&](auto v) { return attn::divided_space(v[0], v[1], v[2], g, 0.6); });
      check("divided_time", [&](auto v) { return attn::divided_time(v[0], v[1], v[2], g, 0.6); });
      for (NormMode norm : {NormMode::kSpatialPerFrame, NormMode::kSpaceTime})
        for (TemporalMode tm : {TemporalMode::kAttention, TemporalMode::kAverage})
          check("trajectory", [&](auto v) {
            const attn::Stage1 s1 = attn::trajectory_stage1(v[0], v[1], v[2], g, 0.6, norm);
            return attn::trajectory_stage2(s1, v[3], v[4], v[5], 0.6, tm);
          });
    }
  }
}

TEST_SUITE("attention csv") {
  TEST_CASE("one row per map entry") {
    Rng rng(18);
    const GridDims g{3, 2};
    const Qkv a = random_qkv(rng, 6, 2);
    const auto inter = trajectory_stage1(g, a.q, a.k, a.v, 0.5, NormMode::kSpatialPerFrame);
    std::ostringstream os;
    write_attention_csv(os, inter);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "s,t,t_prime,s_prime,weight");
    std::size_t rows = 0;
    double total = 0.0;
    while (std::getline(is, line)) {
      ++rows;
      total += std::stod(line.substr(line.rfind(',') + 1));
    }
    CHECK(rows == 6 * 2 * 3);
    // Each (reference token, frame) row of weights sums to one.
    CHECK(std::abs(total - 12.0) <= 1e-9);
  }
}
