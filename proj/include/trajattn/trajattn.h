/* Copyright 2026 The trajattn Authors
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef TRAJATTN_TRAJATTN_H_
#define TRAJATTN_TRAJATTN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(TA_BUILDING_LIBRARY)
#define TA_API __declspec(dllexport)
#else
#define TA_API __declspec(dllimport)
#endif
#else
#define TA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ta_status {
  TA_OK = 0,
  TA_ERR_INVALID_ARGUMENT = 1,
  TA_ERR_SHAPE_MISMATCH = 2,
  TA_ERR_IO = 3,
  TA_ERR_BAD_MAGIC = 4,
  TA_ERR_TRUNCATED_PAYLOAD = 5,
  TA_ERR_RANK_TOO_LARGE = 6,
  TA_ERR_NUMERIC = 7,
  TA_ERR_CONFIG = 8,
  TA_ERR_CHECK_FAILED = 9,
  TA_ERR_INTERNAL = 10
} ta_status;

typedef enum ta_dtype { TA_F64 = 0, TA_F32 = 1 } ta_dtype;
typedef enum ta_norm_mode { TA_NORM_SPATIAL = 0, TA_NORM_SPACE_TIME = 1 } ta_norm_mode;
typedef enum ta_temporal_mode { TA_TEMPORAL_ATTENTION = 0, TA_TEMPORAL_AVERAGE = 1 } ta_temporal_mode;

/* Immutable dense row-major array of doubles. */
typedef struct ta_tensor ta_tensor;

TA_API const char* ta_version(void);
TA_API const char* ta_status_name(ta_status status);
/* Message of the most recent failure on the calling thread; "" after success. */
TA_API const char* ta_last_error(void);

/* ---- tensors ---- */

/* Copies `data` (product(shape) values; NULL means zeros). */
TA_API ta_status ta_tensor_create(const size_t* shape, size_t rank, const double* data,
                                  ta_tensor** out);
TA_API void ta_tensor_free(ta_tensor* t);
TA_API size_t ta_tensor_rank(const ta_tensor* t);
TA_API size_t ta_tensor_dim(const ta_tensor* t, size_t axis);
TA_API size_t ta_tensor_size(const ta_tensor* t);
TA_API const double* ta_tensor_data(const ta_tensor* t);

TA_API ta_status ta_tensor_read(const char* path, ta_tensor** out);
TA_API ta_status ta_tensor_write(const char* path, const ta_tensor* t, ta_dtype dtype);

/* ---- kernels (single head; tokens frame-major, i = t * S + s) ---- */

TA_API ta_status ta_softmax_rows(const ta_tensor* x, double scale, ta_tensor** out);
TA_API ta_status ta_matmul(const ta_tensor* a, const ta_tensor* b, ta_tensor** out);
TA_API ta_status ta_joint_attention(const ta_tensor* q, const ta_tensor* k, const ta_tensor* v,
                                    double scale, ta_tensor** out);
TA_API ta_status ta_divided_space_attention(size_t S, size_t T, const ta_tensor* q,
                                            const ta_tensor* k, const ta_tensor* v, double scale,
                                            ta_tensor** out);
TA_API ta_status ta_divided_time_attention(size_t S, size_t T, const ta_tensor* q,
                                           const ta_tensor* k, const ta_tensor* v, double scale,
                                           ta_tensor** out);
/* Stage-one maps [S*T, T, S] and trajectory tokens [S*T, T, D]; either
 * output pointer may be NULL. */
TA_API ta_status ta_trajectory_stage1(size_t S, size_t T, const ta_tensor* q, const ta_tensor* k,
                                      const ta_tensor* v, double scale, ta_norm_mode norm,
                                      ta_tensor** maps, ta_tensor** tokens);
/* Both stages on already-projected q, k, v. The second-stage matrices may be
 * NULL with TA_TEMPORAL_AVERAGE. */
TA_API ta_status ta_trajectory_attention(size_t S, size_t T, const ta_tensor* q,
                                         const ta_tensor* k, const ta_tensor* v,
                                         const ta_tensor* wq2, const ta_tensor* wk2,
                                         const ta_tensor* wv2, double scale, ta_norm_mode norm,
                                         ta_temporal_mode temporal, ta_tensor** out);
TA_API ta_status ta_orthoformer_attention(const ta_tensor* q, const ta_tensor* k,
                                          const ta_tensor* v, const ta_tensor* prototypes,
                                          double scale, ta_tensor** out);
TA_API ta_status ta_nystromformer_attention(const ta_tensor* q, const ta_tensor* k,
                                            const ta_tensor* v, size_t R, size_t n_iter,
                                            double scale, ta_tensor** out);
TA_API ta_status ta_iterative_pinv(const ta_tensor* a, size_t n_iter, ta_tensor** out);
/* Greedy most-orthogonal prototypes from the rows of [q; k]. */
TA_API ta_status ta_most_orthogonal_subset(const ta_tensor* q, const ta_tensor* k, size_t R,
                                           size_t c, uint64_t seed, ta_tensor** out);

/* ---- harness commands ---- */

/* Runs a harness command ("gradcheck", "flops", "approx-sweep", "train-toy",
 * "stride-sweep", "dump-attn") with a JSON options object (NULL means {}).
 * On TA_OK or TA_ERR_CHECK_FAILED the report JSON and CSV text are returned
 * through the optional out pointers; free them with ta_string_free.
 * TA_ERR_CHECK_FAILED means the command ran and at least one check failed. */
TA_API ta_status ta_run_command(const char* command, const char* options_json,
                                char** report_json, char** csv);
TA_API void ta_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* TRAJATTN_TRAJATTN_H_ */
