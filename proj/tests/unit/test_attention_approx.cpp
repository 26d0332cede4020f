// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "approx/approx.hpp"
#include "core/gradcheck.hpp"
#include "doctest.h"
#include "frozen.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace trajattn;
using testing::make;
using testing::max_diff;

namespace {

void check_stochastic(const Tensor& m, double tol = 1e-10) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double v : m.row(r)) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= tol);
  }
}

void check_convex_hull(const Tensor& y, const Tensor& v) {
  for (std::size_t c = 0; c < v.cols(); ++c) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t j = 0; j < v.rows(); ++j) {
      lo = std::min(lo, v.at(j, c));
      hi = std::max(hi, v.at(j, c));
    }
    for (std::size_t i = 0; i < y.rows(); ++i) {
      CHECK(y.at(i, c) >= lo - 1e-12);
      CHECK(y.at(i, c) <= hi + 1e-12);
    }
  }
}

Tensor with_identical_keys(Tensor k) {
  for (std::size_t i = 1; i < k.rows(); ++i)
    for (std::size_t c = 0; c < k.cols(); ++c) k.at(i, c) = k.at(0, c);
  return k;
}

Tensor column_means(const Tensor& v) {
  Tensor out({v.rows(), v.cols()});
  for (std::size_t c = 0; c < v.cols(); ++c) {
    double m = 0.0;
    for (std::size_t j = 0; j < v.rows(); ++j) m += v.at(j, c) / static_cast<double>(v.rows());
    for (std::size_t i = 0; i < v.rows(); ++i) out.at(i, c) = m;
  }
  return out;
}

}  // namespace

TEST_SUITE("most_orthogonal_subset") {
  TEST_CASE("orthogonality forces the second pick") {
    const Tensor rows = Tensor::matrix({{1, 0}, {1, 0}, {0, 1}});
    CHECK(greedy_most_orthogonal(rows, 2, 0) == std::vector<std::size_t>{0, 2});
    Rng rng(0);
    const PrototypeSet set = most_orthogonal_subset(rows, Tensor::matrix({{1, 0}}), 2, 4, rng, 0);
    CHECK(set.indices == std::vector<std::size_t>{0, 2});
    CHECK(identical(set.P, Tensor::matrix({{1, 0}, {0, 1}})));
  }

  TEST_CASE("one prototype is the start candidate") {
    Rng rng(1);
    const Tensor q = rng.normal_tensor({5, 3}), k = rng.normal_tensor({5, 3});
    for (std::size_t start = 0; start < 10; ++start) {
      Rng r(2);
      const PrototypeSet set = most_orthogonal_subset(q, k, 1, 10, r, start);
      CHECK(set.indices == std::vector<std::size_t>{start});
    }
  }

  TEST_CASE("full pool equals the exhaustive greedy oracle") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      const Tensor q = rng.normal_tensor({16, 8}), k = rng.normal_tensor({16, 8});
      const PrototypeSet set = most_orthogonal_subset(q, k, 4, 8, rng);
      const std::vector<Tensor> parts{q, k};
      CHECK(set.indices == oracle::greedy(concat_rows(parts), 4, set.indices.front()));
      CHECK(set.R() == 4);
      CHECK_FALSE(set.clamped);
    }
  }

  TEST_CASE("zero rows are never preferred and unnormalised rows are returned") {
    const Tensor rows = Tensor::matrix({{3, 0, 0}, {0, 0, 0}, {0, 5, 0}, {0, 0, -2}});
    CHECK(greedy_most_orthogonal(rows, 3, 0) == std::vector<std::size_t>{0, 2, 3});
    Rng rng(3);
    const PrototypeSet set = most_orthogonal_subset(rows, Tensor::matrix({{1, 1, 1}}), 3, 4, rng, 0);
    CHECK(identical(set.P, Tensor::matrix({{3, 0, 0}, {0, 5, 0}, {0, 0, -2}})));
  }

  TEST_CASE("R beyond the pool is clamped and flagged") {
    Rng rng(4);
    const Tensor q = rng.normal_tensor({2, 3}), k = rng.normal_tensor({3, 3});
    const PrototypeSet set = most_orthogonal_subset(q, k, 9, 4, rng);
    CHECK(set.clamped);
    CHECK(set.requested == 9);
    CHECK(set.R() == 5);
  }

  TEST_CASE("subsampling keeps c R candidates") {
    Rng rng(5);
    const Tensor q = rng.normal_tensor({50, 4}), k = rng.normal_tensor({50, 4});
    AllocationProbe probe;
    const PrototypeSet set = most_orthogonal_subset(q, k, 3, 2, rng, std::nullopt, &probe);
    CHECK(set.R() == 3);
    CHECK(probe[AllocKind::kPrototypeBuild] > 0);
  }
}

TEST_SUITE("random_prototypes") {
  TEST_CASE("pool of size R is returned whole in draw order") {
    Rng rng(6);
    const Tensor q = rng.normal_tensor({2, 3}), k = rng.normal_tensor({2, 3});
    Rng a(7), b(7);
    const PrototypeSet set = random_prototypes(q, k, 4, a);
    CHECK(std::set<std::size_t>(set.indices.begin(), set.indices.end()) ==
          std::set<std::size_t>{0, 1, 2, 3});
    CHECK(set.indices == b.sample_without_replacement(4, 4));
  }

  TEST_CASE("fixed seed repeats the selection") {
    Rng rng(8);
    const Tensor q = rng.normal_tensor({10, 3}), k = rng.normal_tensor({10, 3});
    Rng a(9), b(9);
    CHECK(identical(random_prototypes(q, k, 5, a).P, random_prototypes(q, k, 5, b).P));
  }

  TEST_CASE("single draws are uniform over the pool") {
    Rng rng(10);
    const Tensor q = rng.normal_tensor({5, 2}), k = rng.normal_tensor({5, 2});
    std::map<std::size_t, int> counts;
    for (int i = 0; i < 10000; ++i) ++counts[random_prototypes(q, k, 1, rng).indices[0]];
    CHECK(counts.size() == 10);
    for (const auto& [index, n] : counts) CHECK(std::abs(n / 10000.0 - 0.1) <= 0.01);
  }
}

TEST_SUITE("segment_means") {
  TEST_CASE("R = N is the identity") {
    Rng rng(11);
    const Tensor q = rng.normal_tensor({6, 3}), k = rng.normal_tensor({6, 3});
    const auto [pq, pk] = segment_means(q, k, 6);
    CHECK(identical(pq, q));
    CHECK(identical(pk, k));
  }

  TEST_CASE("pairs and uneven segments") {
    const Tensor x = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}});
    CHECK(max_diff(segment_means(rows_slice(x, 0, 4), 2), Tensor::matrix({{2, 3}, {6, 7}})) == 0.0);
    // Sizes 3 and 2.
    CHECK(max_diff(segment_means(x, 2), Tensor::matrix({{3, 4}, {8, 9}})) <= 1e-15);
    const Tensor m = segment_mean_matrix(5, 2);
    CHECK(max_diff(matmul(m, x), segment_means(x, 2)) <= 1e-15);
  }

  TEST_CASE("R > N is an error") {
    CHECK(testing::error_code_of([] { segment_means(Tensor::zeros({3, 2}), 4); }) ==
          testing::code(ErrorCode::kInvalidArgument));
  }
}

TEST_SUITE("orthoformer_attention") {
  TEST_CASE("single token is exact") {
    Rng rng(12);
    const Tensor q = rng.normal_tensor({1, 4}), k = rng.normal_tensor({1, 4}),
                 v = rng.normal_tensor({1, 4});
    CHECK(identical(orthoformer_attention(q, k, v, k, 0.5).output, v));
  }

  TEST_CASE("identical keys reproduce exact attention") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 1 + rng.uniform_index(20), R = 1 + rng.uniform_index(6);
      const Tensor q = rng.normal_tensor({n, 5}), k = with_identical_keys(rng.normal_tensor({n, 5})),
                   v = rng.normal_tensor({n, 5}), P = rng.normal_tensor({R, 5});
      const Tensor y = orthoformer_attention(q, k, v, P, 0.45).output;
      CHECK(max_diff(y, column_means(v)) <= 1e-12);
      CHECK(max_diff(y, oracle::joint(q, k, v, 0.45)) <= 1e-12);
    }
  }

  TEST_CASE("matches the explicit product") {
    Rng rng(14);
    const Tensor q = rng.normal_tensor({9, 4}), k = rng.normal_tensor({9, 4}),
                 v = rng.normal_tensor({9, 4}), P = rng.normal_tensor({3, 4});
    const ApproxAttentionResult r = orthoformer_attention(q, k, v, P, 0.5);
    const Tensor o1 = oracle::softmax_matrix(q, P, 0.5), o2 = oracle::softmax_matrix(P, k, 0.5);
    CHECK(max_diff(r.omega1, o1) <= 1e-14);
    CHECK(max_diff(r.omega2, o2) <= 1e-14);
    CHECK(max_diff(r.output, oracle::matmul(o1, oracle::matmul(o2, v))) <= 1e-12);
  }

  TEST_CASE("error shrinks as prototypes grow") {
    const std::vector<std::size_t> Rs{2, 8, 16};
    std::vector<double> ortho(Rs.size()), nys(Rs.size());
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(500 + seed);
      const Tensor q = rng.normal_tensor({64, 16}), k = rng.normal_tensor({64, 16}),
                   v = rng.normal_tensor({64, 16});
      const double scale = default_scale(16);
      const Tensor exact = oracle::joint(q, k, v, scale);
      for (std::size_t i = 0; i < Rs.size(); ++i) {
        Rng pick(seed);
        const PrototypeSet set = most_orthogonal_subset(q, k, Rs[i], 4, pick);
        ortho[i] += oracle::rel_frobenius(orthoformer_attention(q, k, v, set.P, scale).output, exact);
        nys[i] += oracle::rel_frobenius(
            nystromformer_attention(q, k, v, {Rs[i], 6}, scale).output, exact);
      }
    }
    CHECK(ortho[0] > ortho[1]);
    CHECK(ortho[1] > ortho[2]);
    CHECK(nys[0] > nys[1]);
    CHECK(nys[1] > nys[2]);
  }
}

TEST_SUITE("iterative_pinv") {
  TEST_CASE("fixed points") {
    for (std::size_t n : {1, 3, 8}) {
      for (std::size_t it : {6, 10}) {
        CHECK(max_diff(iterative_pinv(Tensor::identity(n), it), Tensor::identity(n)) <= 1e-10);
        CHECK(max_diff(iterative_pinv(scaled(Tensor::identity(n), 2.0), it),
                       scaled(Tensor::identity(n), 0.5)) <= 1e-8);
      }
    }
  }

  TEST_CASE("frozen 8x8 softmax matrix") {
    const Tensor a = softmax_rows(make({8, 8}, frozen::kPinvLogits), 1.0);
    const Tensor pinv = make({8, 8}, frozen::kPinv);
    // Same six steps as the numpy reference.
    CHECK(max_diff(iterative_pinv(a, 6), make({8, 8}, frozen::kPinvIter6)) <= 1e-9);
    // Converged well before 12 steps; the oracle inverse agrees with numpy.
    CHECK(max_diff(iterative_pinv(a, 12), pinv) <= 1e-8);
    CHECK(max_diff(oracle::inverse(a), pinv) <= 1e-10);
  }

  TEST_CASE("converges on random softmax matrices given enough steps") {
    Rng rng(15);
    int checked = 0;
    while (checked < 50) {
      const Tensor a = softmax_rows(rng.normal_tensor({8, 8}), 1.0);
      if (oracle::condition_inf(a) >= 100.0) continue;
      ++checked;
      CHECK(max_diff(iterative_pinv(a, 20), oracle::inverse(a)) <= 1e-4);
    }
  }

  TEST_CASE("argument errors") {
    CHECK(testing::error_code_of([] { iterative_pinv(Tensor::zeros({2, 3}), 6); }) ==
          testing::code(ErrorCode::kShapeMismatch));
    CHECK(testing::error_code_of([] { iterative_pinv(Tensor::identity(2), 0); }) ==
          testing::code(ErrorCode::kInvalidArgument));
  }
}

TEST_SUITE("nystromformer_attention") {
  TEST_CASE("R = N matches the direct pseudoinverse formula") {
    Rng rng(16);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + rng.uniform_index(3), d = 4;
      const Tensor q = rng.normal_tensor({n, d}), k = rng.normal_tensor({n, d}),
                   v = rng.normal_tensor({n, d});
      const double scale = default_scale(d);
      const Tensor o = oracle::softmax_matrix(q, k, scale);
      const Tensor expected =
          oracle::matmul(o, oracle::matmul(oracle::inverse(o), oracle::matmul(o, v)));
      // Six steps are often short of convergence on these matrices, so the
      // formula is checked with a converged iteration count.
      const ApproxAttentionResult r = nystromformer_attention(q, k, v, {n, 40}, scale);
      CHECK(max_diff(r.output, expected) <= 1e-4);
      CHECK(max_diff(r.omega1, o) <= 1e-14);
      CHECK(max_diff(r.omega2, o) <= 1e-14);
      CHECK(max_diff(r.omega3, o) <= 1e-14);
    }
  }

  TEST_CASE("default iteration count follows the grouping with the six-step inverse") {
    Rng rng(17);
    const Tensor q = rng.normal_tensor({10, 4}), k = rng.normal_tensor({10, 4}),
                 v = rng.normal_tensor({10, 4});
    const ApproxAttentionResult r = nystromformer_attention(q, k, v, {3, 6}, 0.5);
    const auto [pq, pk] = segment_means(q, k, 3);
    CHECK(max_diff(r.omega1, oracle::softmax_matrix(q, pk, 0.5)) <= 1e-14);
    CHECK(max_diff(r.omega2, oracle::softmax_matrix(pq, pk, 0.5)) <= 1e-14);
    CHECK(max_diff(r.omega3, oracle::softmax_matrix(pq, k, 0.5)) <= 1e-14);
    CHECK(max_diff(r.omega2_inv, iterative_pinv(r.omega2, 6)) == 0.0);
    const Tensor expected =
        oracle::matmul(r.omega1, oracle::matmul(r.omega2_inv, oracle::matmul(r.omega3, v)));
    CHECK(max_diff(r.output, expected) <= 1e-12);
  }

  TEST_CASE("identical keys give the column mean") {
    Rng rng(18);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 2 + rng.uniform_index(30),
                        R = 1 + rng.uniform_index(std::min<std::size_t>(n, 8));
      const Tensor q = rng.normal_tensor({n, 4}), k = with_identical_keys(rng.normal_tensor({n, 4})),
                   v = rng.normal_tensor({n, 4});
      CHECK(max_diff(nystromformer_attention(q, k, v, {R, 6}, 0.5).output, column_means(v)) <= 1e-10);
    }
  }

  TEST_CASE("R > N is an error") {
    const Tensor x = Tensor::zeros({3, 2});
    CHECK(testing::error_code_of([&] { nystromformer_attention(x, x, x, {4, 6}, 1.0); }) ==
          testing::code(ErrorCode::kInvalidArgument));
  }
}

TEST_SUITE("approximation invariants") {
  TEST_CASE("stochastic factors, convex hull, distinct picks and determinism") {
    Rng rng(19);
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = 1 + rng.uniform_index(24), d = 1 + rng.uniform_index(8);
      const std::size_t R = 1 + rng.uniform_index(std::min<std::size_t>(n, 8));
      const Tensor q = rng.normal_tensor({n, d}, 2.0), k = rng.normal_tensor({n, d}, 2.0),
                   v = rng.normal_tensor({n, d});
      const double scale = default_scale(d);
      for (PrototypeStrategy s :
           {PrototypeStrategy::kMostOrthogonal, PrototypeStrategy::kRandom,
            PrototypeStrategy::kSegmentMeans}) {
        PrototypeOptions opts;
        opts.R = R;
        opts.strategy = s;
        Rng a(trial), b(trial);
        const PrototypeSet set = select_prototypes(q, k, opts, a);
        const PrototypeSet again = select_prototypes(q, k, opts, b);
        CHECK(identical(set.P, again.P));
        CHECK(set.indices == again.indices);
        CHECK(std::set<std::size_t>(set.indices.begin(), set.indices.end()).size() ==
              set.indices.size());
        const ApproxAttentionResult r = orthoformer_attention(q, k, v, set.P, scale);
        check_stochastic(r.omega1);
        check_stochastic(r.omega2);
        check_convex_hull(r.output, v);
      }
      const ApproxAttentionResult ny = nystromformer_attention(q, k, v, {R, 6}, scale);
      check_stochastic(ny.omega1);
      check_stochastic(ny.omega2);
      check_stochastic(ny.omega3);
    }
  }
}

TEST_SUITE("approx_trajectory_stage1") {
  TEST_CASE("one frame: shared and unshared agree") {
    Rng rng(20);
    for (int trial = 0; trial < 20; ++trial) {
      const GridDims g{6, 1};
      const Tensor q = rng.normal_tensor({6, 4}), k = rng.normal_tensor({6, 4}),
                   v = rng.normal_tensor({6, 4});
      PrototypeOptions shared;
      shared.R = 3;
      shared.seed = trial;
      PrototypeOptions unshared = shared;
      unshared.shared_across_time = false;
      const auto a = approx_trajectory_stage1(g, q, k, v, shared, 0.5);
      const auto b = approx_trajectory_stage1(g, q, k, v, unshared, 0.5);
      CHECK(max_diff(a.inter.tokens, b.inter.tokens) <= 1e-12);
    }
  }

  TEST_CASE("identical frames: shared and unshared agree from the same start") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t S = 5, T = 3, d = 4;
      const Tensor q1 = rng.normal_tensor({S, d}), k1 = rng.normal_tensor({S, d}),
                   v1 = rng.normal_tensor({S, d});
      const std::vector<Tensor> qs(T, q1), ks(T, k1), vs(T, v1);
      const Tensor q = concat_rows(qs), k = concat_rows(ks), v = concat_rows(vs);
      PrototypeOptions shared;
      shared.R = 4;
      shared.c = 64;  // no subsampling, so both pools hold the same distinct rows
      shared.fixed_start = rng.uniform_index(S * T);
      PrototypeOptions unshared = shared;
      unshared.shared_across_time = false;
      const auto a = approx_trajectory_stage1({S, T}, q, k, v, shared, 0.5);
      const auto b = approx_trajectory_stage1({S, T}, q, k, v, unshared, 0.5);
      CHECK(max_diff(a.inter.tokens, b.inter.tokens) <= 1e-12);
    }
  }

  TEST_CASE("R = 8 beats R = 2 against exact stage one") {
    const GridDims g{16, 4};
    double err2 = 0.0, err8 = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(700 + seed);
      const Tensor q = rng.normal_tensor({64, 16}), k = rng.normal_tensor({64, 16}),
                   v = rng.normal_tensor({64, 16});
      const double scale = default_scale(16);
      const Tensor exact = trajectory_stage1(g, q, k, v, scale, NormMode::kSpatialPerFrame).tokens;
      PrototypeOptions opts;
      opts.seed = seed;
      opts.R = 2;
      err2 += oracle::rel_frobenius(approx_trajectory_stage1(g, q, k, v, opts, scale).inter.tokens,
                                    exact);
      opts.R = 8;
      err8 += oracle::rel_frobenius(approx_trajectory_stage1(g, q, k, v, opts, scale).inter.tokens,
                                    exact);
    }
    CHECK(err8 < err2);
  }

  TEST_CASE("sharing builds fewer prototypes for T >= 2") {
    Rng rng(22);
    for (std::size_t T : {2, 3, 5}) {
      const GridDims g{8, T};
      const Tensor q = rng.normal_tensor({8 * T, 4}), k = rng.normal_tensor({8 * T, 4}),
                   v = rng.normal_tensor({8 * T, 4});
      PrototypeOptions shared;
      shared.R = 4;
      PrototypeOptions unshared = shared;
      unshared.shared_across_time = false;
      const auto a = approx_trajectory_stage1(g, q, k, v, shared, 0.5);
      const auto b = approx_trajectory_stage1(g, q, k, v, unshared, 0.5);
      CHECK(a.prototypes.size() == 1);
      CHECK(b.prototypes.size() == T);
      CHECK(a.probe[AllocKind::kPrototypeBuild] < b.probe[AllocKind::kPrototypeBuild]);
      for (std::size_t i = 0; i < 8 * T; ++i)
        for (std::size_t tp = 0; tp < T; ++tp) {
          double s = 0.0;
          for (std::size_t sp = 0; sp < 8; ++sp) s += a.inter.maps[(i * T + tp) * 8 + sp];
          CHECK(std::abs(s - 1.0) <= 1e-10);
        }
    }
  }

  TEST_CASE("gradients through shared and unshared approximations") {
    for (bool shared : {true, false}) {
      Rng rng(23);
      const GridDims g{4, 2};
      std::vector<Tensor> in{rng.normal_tensor({8, 3}), rng.normal_tensor({8, 3}),
                             rng.normal_tensor({8, 3})};
      const Tensor w = rng.normal_tensor({8, 3});
      PrototypeOptions opts;
      opts.R = 3;
      opts.shared_across_time = shared;
      const double err =
          gradcheck(
              [&](Tape&, std::span<const Var> v) {
                Rng r(5);
                const attn::Stage1 s1 =
                    attn::approx_trajectory_stage1(v[0], v[1], v[2], g, opts, 0.6, r);
                return ad::weighted_sum(attn::temporal_average(s1.per_frame), w);
              },
              in)
              .max_relative_error;
      CHECK(err < 1e-4);
    }
  }
}

TEST_SUITE("allocation_probe") {
  TEST_CASE("exact grows fourfold and Orthoformer twofold when N doubles") {
    for (std::size_t n : {32, 64, 128, 256}) {
      const auto e1 = allocation_probe(AttentionMethod::kExact, n, 8, 16, 4, 1);
      const auto e2 = allocation_probe(AttentionMethod::kExact, 2 * n, 8, 16, 4, 1);
      CHECK(e2.attention == 4 * e1.attention);
      const auto o1 = allocation_probe(AttentionMethod::kOrthoformer, n, 8, 16, 4, 1);
      const auto o2 = allocation_probe(AttentionMethod::kOrthoformer, 2 * n, 8, 16, 4, 1);
      CHECK(o2.attention == 2 * o1.attention);
      // The candidate pool is capped at c R rows, independent of N.
      CHECK(o2.prototype_build == o1.prototype_build);
    }
  }
}
