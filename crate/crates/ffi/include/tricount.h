#ifndef TRICOUNT_H
#define TRICOUNT_H

/* Generated by cbindgen; do not edit. Regenerate with: TRICOUNT_REGEN_HEADER=1 cargo test -p tricount-ffi header */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TcStatus {
  TC_STATUS_OK = 0,
  TC_STATUS_NULL_POINTER = 1,
  TC_STATUS_INVALID_CONFIG = 2,
  /**
   * Self-loops are not part of the model.
   */
  TC_STATUS_INVALID_EDGE = 3,
  TC_STATUS_PANIC = 4,
} TcStatus;

typedef enum TcAlgorithm {
  TC_ALGORITHM_TRIFLY = 0,
  TC_ALGORITHM_COCOS_SIMPLE = 1,
  TC_ALGORITHM_COCOS_OPT = 2,
} TcAlgorithm;

/**
 * Opaque incremental pipeline handle.
 */
typedef struct TcPipeline TcPipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a pipeline. `theta` only matters for `TC_ALGORITHM_COCOS_OPT`;
 * pass 0.2 for the default policy. On success writes the handle to `out`.
 *
 * # Safety
 * `out` must be a valid pointer to a `TcPipeline*` slot.
 */
enum TcStatus tc_pipeline_new(enum TcAlgorithm algorithm,
                              size_t k,
                              size_t budget,
                              double theta,
                              uint64_t seed,
                              struct TcPipeline **out);

/**
 * Feeds one undirected edge `{u, v}`; endpoint order does not matter.
 *
 * # Safety
 * `pipeline` must be a live handle from `tc_pipeline_new`.
 */
enum TcStatus tc_pipeline_process_edge(struct TcPipeline *pipeline, uint64_t u, uint64_t v);

/**
 * Writes the current global triangle estimate to `out`.
 *
 * # Safety
 * `pipeline` must be a live handle; `out` must be a valid `double` slot.
 */
enum TcStatus tc_pipeline_global_estimate(struct TcPipeline *pipeline, double *out);

/**
 * Writes the current estimate of triangles incident to `node` to `out`
 * (0 for nodes never seen).
 *
 * # Safety
 * `pipeline` must be a live handle; `out` must be a valid `double` slot.
 */
enum TcStatus tc_pipeline_local_estimate(struct TcPipeline *pipeline, uint64_t node, double *out);

/**
 * Frees a pipeline handle; a null pointer is a no-op.
 *
 * # Safety
 * `pipeline` must be null or a live handle, and must not be used afterward.
 */
void tc_pipeline_free(struct TcPipeline *pipeline);

/**
 * Exact global triangle count of an edge list given as `len` pairs laid out
 * flat: `edges[2*i]`, `edges[2*i + 1]`. Duplicate edges are ignored after
 * their first occurrence; a self-loop fails the whole call.
 *
 * # Safety
 * `edges` must point to at least `2 * len` readable `uint64_t` values
 * (unless `len` is 0); `out` must be a valid slot.
 */
enum TcStatus tc_exact_global_count(const uint64_t *edges, size_t len, uint64_t *out);

/**
 * NUL-terminated library version; storage is static.
 */
const char *tc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRICOUNT_H */
