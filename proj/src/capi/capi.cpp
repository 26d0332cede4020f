// Copyright 2026 The trajattn Authors
// SPDX-License-Identifier: Apache-2.0

#include "trajattn/trajattn.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "approx/approx.hpp"
#include "attention/exact.hpp"
#include "core/error.hpp"
#include "core/fixture.hpp"
#include "harness/commands.hpp"

struct ta_tensor {
  trajattn::Tensor value;
};

namespace {

using trajattn::ErrorCode;
using trajattn::Tensor;

thread_local std::string g_last_error;

ta_status to_status(ErrorCode code) { return static_cast<ta_status>(static_cast<int>(code)); }

template <typename Fn>
ta_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return TA_OK;
  } catch (const trajattn::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TA_ERR_INTERNAL;
  }
}

const Tensor& in(const ta_tensor* t, const char* what) {
  trajattn::require(t != nullptr, ErrorCode::kInvalidArgument,
                    [&] { return std::string(what) + " is NULL"; });
  return t->value;
}

void out_ptr(void* p) {
  trajattn::require(p != nullptr, ErrorCode::kInvalidArgument, "output pointer is NULL");
}

ta_tensor* wrap(Tensor t) { return new ta_tensor{std::move(t)}; }

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

trajattn::GridDims grid(size_t S, size_t T) {
  trajattn::require(S > 0 && T > 0, ErrorCode::kInvalidArgument, "S and T must be positive");
  return {S, T};
}

trajattn::NormMode norm_of(ta_norm_mode m) {
  return m == TA_NORM_SPACE_TIME ? trajattn::NormMode::kSpaceTime
                                 : trajattn::NormMode::kSpatialPerFrame;
}

}  // namespace

extern "C" {

const char* ta_version(void) { return "0.1.0"; }

const char* ta_status_name(ta_status status) {
  switch (status) {
    case TA_OK: return "ok";
    case TA_ERR_INVALID_ARGUMENT: return "invalid argument";
    case TA_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case TA_ERR_IO: return "i/o error";
    case TA_ERR_BAD_MAGIC: return "bad magic";
    case TA_ERR_TRUNCATED_PAYLOAD: return "truncated payload";
    case TA_ERR_RANK_TOO_LARGE: return "rank too large";
    case TA_ERR_NUMERIC: return "numeric error";
    case TA_ERR_CONFIG: return "configuration error";
    case TA_ERR_CHECK_FAILED: return "check failed";
    case TA_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ta_last_error(void) { return g_last_error.c_str(); }

ta_status ta_tensor_create(const size_t* shape, size_t rank, const double* data,
                           ta_tensor** out) {
  return guarded([&] {
    out_ptr(out);
    *out = nullptr;
    trajattn::require(rank == 0 || shape != nullptr, ErrorCode::kInvalidArgument,
                      "shape is NULL");
    trajattn::Shape s(shape, shape + rank);
    Tensor t(s);
    if (data) std::memcpy(t.data().data(), data, t.size() * sizeof(double));
    *out = wrap(std::move(t));
  });
}

void ta_tensor_free(ta_tensor* t) { delete t; }

size_t ta_tensor_rank(const ta_tensor* t) { return t ? t->value.rank() : 0; }

size_t ta_tensor_dim(const ta_tensor* t, size_t axis) {
  return t && axis < t->value.rank() ? t->value.shape()[axis] : 0;
}

size_t ta_tensor_size(const ta_tensor* t) { return t ? t->value.size() : 0; }

const double* ta_tensor_data(const ta_tensor* t) { return t ? t->value.data().data() : nullptr; }

ta_status ta_tensor_read(const char* path, ta_tensor** out) {
  return guarded([&] {
    out_ptr(out);
    *out = nullptr;
    trajattn::require(path != nullptr, ErrorCode::kInvalidArgument, "path is NULL");
    *out = wrap(trajattn::read_tensor(path));
  });
}

ta_status ta_tensor_write(const char* path, const ta_tensor* t, ta_dtype dtype) {
  return guarded([&] {
    trajattn::require(path != nullptr, ErrorCode::kInvalidArgument, "path is NULL");
    trajattn::require(dtype == TA_F64 || dtype == TA_F32, ErrorCode::kInvalidArgument,
                      "unknown dtype");
    trajattn::write_tensor(path, in(t, "tensor"),
                           dtype == TA_F64 ? trajattn::DType::kF64 : trajattn::DType::kF32);
  });
}

ta_status ta_softmax_rows(const ta_tensor* x, double scale, ta_tensor** out) {
  return guarded([&] {
    out_ptr(out);
    *out = wrap(trajattn::softmax_rows(in(x, "x"), scale));
  });
}

ta_status ta_matmul(const ta_tensor* a, const ta_tensor* b, ta_tensor** out) {
  return guarded([&] {
    out_ptr(out);
    *out = wrap(trajattn::matmul(in(a, "a"), in(b, "b")));
  });
}

ta_status ta_joint_attention(const ta_tensor* q, const ta_tensor* k, const ta_tensor* v,
                             double scale, ta_tensor** out) {
  return guarded([&] {
    out_ptr(out);
    *out = wrap(trajattn::joint_attention(in(q, "q"), in(k, "k"), in(v, "v"), scale));
  });
}

ta_status ta_divided_space_attention(size_t S, size_t T, const ta_tensor* q, const ta_tensor* k,
                                     const ta_tensor* v, double scale, ta_tensor** out) {
  return guarded([&] {
    out_ptr(out);
    *out = wrap(trajattn::divided_space_attention(grid(S, T), in(q, "q"), in(k, "k"),
                                                  in(v, "v"), scale));
  });
}

ta_status ta_divided_time_attention(size_t S, size_t T, const ta_tensor* q, const ta_tensor* k,
                                    const ta_tensor* v, double scale, ta_tensor** out) {
  return guarded([&] {
    out_ptr(out);
    *out = wrap(trajattn::divided_time_attention(grid(S, T), in(q, "q"), in(k, "k"),
                                                 in(v, "v"), scale));
  });
}

ta_status ta_trajectory_stage1(size_t S, size_t T, const ta_tensor* q, const ta_tensor* k,
                               const ta_tensor* v, double scale, ta_norm_mode norm,
                               ta_tensor** maps, ta_tensor** tokens) {
  return guarded([&] {
    trajattn::TrajectoryIntermediate inter = trajattn::trajectory_stage1(
        grid(S, T), in(q, "q"), in(k, "k"), in(v, "v"), scale, norm_of(norm));
    if (maps) *maps = wrap(std::move(inter.maps));
    if (tokens) *tokens = wrap(std::move(inter.tokens));
  });
}

ta_status ta_trajectory_attention(size_t S, size_t T, const ta_tensor* q, const ta_tensor* k,
                                  const ta_tensor* v, const ta_tensor* wq2, const ta_tensor* wk2,
                                  const ta_tensor* wv2, double scale, ta_norm_mode norm,
                                  ta_temporal_mode temporal, ta_tensor** out) {
  return guarded([&] {
    out_ptr(out);
    const auto tm = temporal == TA_TEMPORAL_AVERAGE ? trajattn::TemporalMode::kAverage
                                                    : trajattn::TemporalMode::kAttention;
    const Tensor& qv = in(q, "q");
    trajattn::QkvProjections proj = trajattn::QkvProjections::identity(qv.cols());
    if (tm == trajattn::TemporalMode::kAttention) {
      proj.wq2 = in(wq2, "wq2");
      proj.wk2 = in(wk2, "wk2");
      proj.wv2 = in(wv2, "wv2");
      proj.validate(qv.cols());
    }
    const auto inter = trajattn::trajectory_stage1(grid(S, T), qv, in(k, "k"), in(v, "v"),
                                                   scale, norm_of(norm));
    *out = wrap(trajattn::trajectory_stage2(inter, proj, scale, tm));
  });
}

ta_status ta_orthoformer_attention(const ta_tensor* q, const ta_tensor* k, const ta_tensor* v,
                                   const ta_tensor* prototypes, double scale, ta_tensor** out) {
  return guarded([&] {
    out_ptr(out);
    *out = wrap(trajattn::orthoformer_attention(in(q, "q"), in(k, "k"), in(v, "v"),
                                                in(prototypes, "prototypes"), scale)
                    .output);
  });
}

ta_status ta_nystromformer_attention(const ta_tensor* q, const ta_tensor* k, const ta_tensor* v,
                                     size_t R, size_t n_iter, double scale, ta_tensor** out) {
  return guarded([&] {
    out_ptr(out);
    *out = wrap(trajattn::nystromformer_attention(in(q, "q"), in(k, "k"), in(v, "v"),
                                                  {R, n_iter}, scale)
                    .output);
  });
}

ta_status ta_iterative_pinv(const ta_tensor* a, size_t n_iter, ta_tensor** out) {
  return guarded([&] {
    out_ptr(out);
    *out = wrap(trajattn::iterative_pinv(in(a, "a"), n_iter));
  });
}

ta_status ta_most_orthogonal_subset(const ta_tensor* q, const ta_tensor* k, size_t R, size_t c,
                                    uint64_t seed, ta_tensor** out) {
  return guarded([&] {
    out_ptr(out);
    trajattn::Rng rng(seed);
    *out = wrap(trajattn::most_orthogonal_subset(in(q, "q"), in(k, "k"), R, c, rng).P);
  });
}

ta_status ta_run_command(const char* command, const char* options_json, char** report_json,
                         char** csv) {
  if (report_json) *report_json = nullptr;
  if (csv) *csv = nullptr;
  bool passed = true;
  const ta_status st = guarded([&] {
    trajattn::require(command != nullptr, ErrorCode::kInvalidArgument, "command is NULL");
    nlohmann::json options = nlohmann::json::object();
    if (options_json && *options_json) {
      try {
        options = nlohmann::json::parse(options_json);
      } catch (const nlohmann::json::exception& e) {
        trajattn::fail(ErrorCode::kConfig, std::string("options are not valid JSON: ") + e.what());
      }
    }
    trajattn::CommandOutput result = trajattn::run_command(command, options);
    result.report["summary"] = result.summary;
    passed = result.passed;
    if (report_json) *report_json = dup_string(result.report.dump(2));
    if (csv) *csv = dup_string(result.csv);
  });
  if (st != TA_OK) return st;
  if (!passed) {
    g_last_error = std::string(command) + ": one or more checks failed";
    return TA_ERR_CHECK_FAILED;
  }
  return TA_OK;
}

void ta_string_free(char* s) { std::free(s); }

}  // extern "C"
