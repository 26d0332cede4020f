// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "approx/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/error.hpp"

namespace trajattn {

std::string to_string(PrototypeStrategy s) {
  switch (s) {
    case PrototypeStrategy::kMostOrthogonal: return "orthogonal";
    case PrototypeStrategy::kRandom: return "random";
    case PrototypeStrategy::kSegmentMeans: return "segment_means";
  }
  return "unknown";
}

PrototypeStrategy parse_strategy(const std::string& name) {
  if (name == "orthogonal" || name == "most_orthogonal")
    return PrototypeStrategy::kMostOrthogonal;
  if (name == "random") return PrototypeStrategy::kRandom;
  if (name == "segment_means" || name == "seg_means")
    return PrototypeStrategy::kSegmentMeans;
  fail(ErrorCode::kConfig, "unknown prototype strategy '" + name + "'");
}

namespace {

Tensor stack(const Tensor& q, const Tensor& k) {
  require(q.rank() == 2 && k.rank() == 2 && q.cols() == k.cols(),
          ErrorCode::kShapeMismatch,
          [&] { return "prototype candidates need equal widths, got " + shape_str(q.shape()) +
              " and " + shape_str(k.shape()); });
  return concat_rows(std::vector<Tensor>{q, k});
}

}  // namespace

std::vector<std::size_t> greedy_most_orthogonal(const Tensor& rows, std::size_t R,
                                                std::size_t start,
                                                AllocationProbe* probe) {
  const std::size_t m = rows.rows();
  const std::size_t d = rows.cols();
  require(R >= 1 && R <= m, ErrorCode::kInvalidArgument,
          [&] { return "greedy selection of " + std::to_string(R) + " from " + std::to_string(m) +
              " candidates"; });
  require(start < m, ErrorCode::kInvalidArgument, "start candidate out of range");
  if (probe) probe->note(AllocKind::kPrototypeBuild, m * d + m);

  Tensor unit = rows;
  std::vector<bool> zero(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    auto r = unit.row(i);
    double norm = 0.0;
    for (double v : r) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      zero[i] = true;
      continue;
    }
    for (double& v : r) v /= norm;
  }
  // worst[i]: largest |cos| between candidate i and the chosen set.
  std::vector<double> worst(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (zero[i]) worst[i] = 1.0;
  std::vector<bool> taken(m, false);
  std::vector<std::size_t> chosen;
  chosen.reserve(R);

  std::size_t pick = start;
  for (;;) {
    chosen.push_back(pick);
    taken[pick] = true;
    if (chosen.size() == R) break;
    if (!zero[pick]) {
      auto p = unit.row(pick);
      for (std::size_t i = 0; i < m; ++i) {
        if (taken[i] || zero[i]) continue;
        auto r = unit.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += r[j] * p[j];
        worst[i] = std::max(worst[i], std::abs(dot));
      }
    }
    std::size_t best = m;
    for (std::size_t i = 0; i < m; ++i) {
      if (taken[i]) continue;
      if (best == m || worst[i] < worst[best]) best = i;
    }
    pick = best;
  }
  return chosen;
}

PrototypeSet most_orthogonal_subset(const Tensor& q, const Tensor& k, std::size_t R,
                                    std::size_t c, Rng& rng,
                                    std::optional<std::size_t> fixed_start,
                                    AllocationProbe* probe) {
  require(R >= 1, ErrorCode::kInvalidArgument, "prototype count must be >= 1");
  require(c >= 1, ErrorCode::kInvalidArgument, "subsampling factor must be >= 1");
  const Tensor all = stack(q, k);
  const std::size_t total = all.rows();

  std::vector<std::size_t> candidates;
  if (c * R >= total) {
    candidates.resize(total);
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
  } else {
    candidates = rng.sample_without_replacement(total, c * R);
    std::sort(candidates.begin(), candidates.end());
  }
  PrototypeSet set;
  set.strategy = PrototypeStrategy::kMostOrthogonal;
  set.requested = R;
  set.clamped = R > candidates.size();
  const std::size_t r = std::min(R, candidates.size());

  const Tensor pool = gather_rows(all, candidates);
  const std::size_t start = fixed_start ? *fixed_start : rng.uniform_index(candidates.size());
  require(start < candidates.size(), ErrorCode::kInvalidArgument,
          [&] { return "fixed start " + std::to_string(start) + " outside a pool of " +
              std::to_string(candidates.size()); });
  if (probe) probe->note(AllocKind::kPrototypeBuild, pool.size());
  for (std::size_t pos : greedy_most_orthogonal(pool, r, start, probe))
    set.indices.push_back(candidates[pos]);
  set.P = gather_rows(all, set.indices);
  return set;
}

PrototypeSet random_prototypes(const Tensor& q, const Tensor& k, std::size_t R, Rng& rng,
                               AllocationProbe* probe) {
  require(R >= 1, ErrorCode::kInvalidArgument, "prototype count must be >= 1");
  const Tensor all = stack(q, k);
  PrototypeSet set;
  set.strategy = PrototypeStrategy::kRandom;
  set.requested = R;
  set.clamped = R > all.rows();
  set.indices = rng.sample_without_replacement(all.rows(), std::min(R, all.rows()));
  set.P = gather_rows(all, set.indices);
  if (probe) probe->note(AllocKind::kPrototypeBuild, set.P.size());
  return set;
}

Tensor segment_mean_matrix(std::size_t n, std::size_t R) {
  require(R >= 1 && R <= n, ErrorCode::kInvalidArgument,
          [&] { return "segment means need 1 <= R <= N, got R=" + std::to_string(R) +
              ", N=" + std::to_string(n); });
  Tensor m({R, n});
  const std::size_t base = n / R;
  const std::size_t extra = n % R;
  std::size_t row = 0;
  for (std::size_t seg = 0; seg < R; ++seg) {
    const std::size_t len = base + (seg < extra ? 1 : 0);
    for (std::size_t j = 0; j < len; ++j) m.at(seg, row + j) = 1.0 / static_cast<double>(len);
    row += len;
  }
  return m;
}

Tensor segment_means(const Tensor& x, std::size_t R) {
  require(x.rank() == 2, ErrorCode::kShapeMismatch, "segment_means expects a matrix");
  require(R <= x.rows(), ErrorCode::kInvalidArgument,
          [&] { return "segment_means: R=" + std::to_string(R) + " exceeds N=" +
              std::to_string(x.rows()); });
  const std::size_t n = x.rows(), d = x.cols();
  const std::size_t base = n / R;
  const std::size_t extra = n % R;
  Tensor out({R, d});
  std::size_t row = 0;
  for (std::size_t seg = 0; seg < R; ++seg) {
    const std::size_t len = base + (seg < extra ? 1 : 0);
    auto o = out.row(seg);
    for (std::size_t i = 0; i < len; ++i) {
      auto in = x.row(row + i);
      for (std::size_t j = 0; j < d; ++j) o[j] += in[j];
    }
    for (double& v : o) v /= static_cast<double>(len);
    row += len;
  }
  return out;
}

std::pair<Tensor, Tensor> segment_means(const Tensor& q, const Tensor& k, std::size_t R) {
  require(q.shape() == k.shape(), ErrorCode::kShapeMismatch,
          [&] { return "segment_means: q " + shape_str(q.shape()) + " and k " + shape_str(k.shape()) +
              " differ"; });
  return {segment_means(q, R), segment_means(k, R)};
}

PrototypeSet select_prototypes(const Tensor& q, const Tensor& k, const PrototypeOptions& opts,
                               Rng& rng, AllocationProbe* probe) {
  switch (opts.strategy) {
    case PrototypeStrategy::kMostOrthogonal:
      return most_orthogonal_subset(q, k, opts.R, opts.c, rng, opts.fixed_start, probe);
    case PrototypeStrategy::kRandom:
      return random_prototypes(q, k, opts.R, rng, probe);
    case PrototypeStrategy::kSegmentMeans: {
      const Tensor all = stack(q, k);
      PrototypeSet set;
      set.strategy = PrototypeStrategy::kSegmentMeans;
      set.requested = opts.R;
      set.clamped = opts.R > all.rows();
      set.P = segment_means(all, std::min(opts.R, all.rows()));
      if (probe) probe->note(AllocKind::kPrototypeBuild, set.P.size());
      return set;
    }
  }
  fail(ErrorCode::kInternal, "unhandled prototype strategy");
}

}  // namespace trajattn
