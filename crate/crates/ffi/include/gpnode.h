#ifndef GPNODE_H
#define GPNODE_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GpStatus {
  GP_STATUS_OK = 0,
  GP_STATUS_INVALID_ARGUMENT = 1,
  GP_STATUS_INVALID_CONFIG = 2,
  GP_STATUS_NUMERICAL = 3,
  GP_STATUS_INTERNAL = 4,
  GP_STATUS_MALFORMED_REPLY = 5,
  GP_STATUS_LOCKED_STATE = 6,
  GP_STATUS_PORT_OCCUPIED = 7,
  GP_STATUS_NOT_FOUND = 8,
  GP_STATUS_INVALID_STATE = 9,
  GP_STATUS_IO = 10,
  GP_STATUS_NULL_POINTER = 11,
  GP_STATUS_BUFFER_TOO_SMALL = 12,
  GP_STATUS_PANIC = 13,
} GpStatus;

typedef enum GpMessageClass {
  GP_MESSAGE_CLASS_COMMAND = 0,
  GP_MESSAGE_CLASS_SAMPLE = 1,
  GP_MESSAGE_CLASS_MALFORMED = 2,
} GpMessageClass;

/**
 * Opaque tree handle.
 */
typedef struct GpTree GpTree;

/**
 * Tree settings. `length_scales` points at `d_in` values. An
 * `overlap_ratio` of 0 selects the default (0.1).
 */
typedef struct GpTreeParams {
  double sigma_f;
  const double *length_scales;
  size_t d_in;
  double sigma_n;
  size_t d_out;
  size_t max_leaves;
  size_t max_local_data;
  double overlap_ratio;
  uint64_t seed;
} GpTreeParams;

typedef struct GpInsertOutcome {
  bool stored;
  bool split_occurred;
} GpInsertOutcome;

typedef struct GpTreeStats {
  size_t leaves;
  size_t stored_points;
  size_t depth;
} GpTreeStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `cap` bytes, into `buf`. Returns the size needed including
 * the terminator; pass `buf = NULL` to query it.
 *
 * # Safety
 * `buf` must be NULL or point to `cap` writable bytes.
 */
size_t gp_last_error_message(char *buf, size_t cap);

/**
 * Static, NUL-terminated name of a status code.
 */
const char *gp_status_name(enum GpStatus status);

/**
 * Creates an empty tree. On success `*out` owns a handle to be released
 * with [`gp_tree_free`]; on failure `*out` is set to NULL.
 *
 * # Safety
 * `params` must point to a valid `GpTreeParams` whose `length_scales`
 * holds `d_in` values; `out` must be writable.
 */
enum GpStatus gp_tree_new(const struct GpTreeParams *params, struct GpTree **out);

/**
 * Releases a tree. NULL is ignored.
 *
 * # Safety
 * `tree` must be NULL or a handle from [`gp_tree_new`] not yet freed.
 */
void gp_tree_free(struct GpTree *tree);

/**
 * Inserts one sample. `outcome` may be NULL.
 *
 * # Safety
 * `tree` must be a live handle; `x` and `y` must hold `d_in` and `d_out`
 * values; `outcome` must be NULL or writable.
 */
enum GpStatus gp_tree_insert(struct GpTree *tree,
                             const double *x,
                             size_t d_in,
                             const double *y,
                             size_t d_out,
                             struct GpInsertOutcome *outcome);

/**
 * Writes the predictive mean at `x` into `mu` (`d_out` values).
 *
 * # Safety
 * `tree` must be a live handle; `x` must hold `d_in` values and `mu` must
 * have room for `d_out`.
 */
enum GpStatus gp_tree_predict(const struct GpTree *tree,
                              const double *x,
                              size_t d_in,
                              double *mu,
                              size_t d_out);

/**
 * Drops all data and re-seeds routing, as the `-1` command does.
 *
 * # Safety
 * `tree` must be a live handle.
 */
enum GpStatus gp_tree_reset(struct GpTree *tree);

/**
 * # Safety
 * `tree` must be a live handle and `out` writable.
 */
enum GpStatus gp_tree_stats(const struct GpTree *tree, struct GpTreeStats *out);

/**
 * ARD-SE kernel `sigma_f^2 exp(-0.5 sum_d (x_d - x2_d)^2 / l_d^2)`.
 *
 * # Safety
 * `x`, `x2` and `length_scales` must hold `d` values; `out` must be writable.
 */
enum GpStatus gp_kernel_eval(const double *x,
                             const double *x2,
                             size_t d,
                             double sigma_f,
                             const double *length_scales,
                             double *out);

/**
 * Classifies a datagram. For a sample, `x_out`/`y_out` receive the inputs
 * and targets and `*scalar_out` the timestamp; for a command,
 * `*scalar_out` is its value. Malformed datagrams are not an error.
 *
 * # Safety
 * `bytes` must hold `len` bytes; `class_out` and `scalar_out` must be
 * writable; `x_out` and `y_out` must have room for `d_in` and `d_out`
 * values.
 */
enum GpStatus gp_decode_datagram(const uint8_t *bytes,
                                 size_t len,
                                 size_t d_in,
                                 size_t d_out,
                                 enum GpMessageClass *class_out,
                                 double *x_out,
                                 double *y_out,
                                 double *scalar_out);

/**
 * Encodes `[x, y, t]`. `*written` receives the encoded size even when the
 * buffer is too small.
 *
 * # Safety
 * `x`/`y` must hold `d_in`/`d_out` values; `buf` must have `cap` writable
 * bytes; `written` must be writable.
 */
enum GpStatus gp_encode_sample(const double *x,
                               size_t d_in,
                               const double *y,
                               size_t d_out,
                               double t,
                               uint8_t *buf,
                               size_t cap,
                               size_t *written);

/**
 * Encodes a single-value command (`-1` resets the model).
 *
 * # Safety
 * `buf` must have `cap` writable bytes; `written` must be writable.
 */
enum GpStatus gp_encode_command(double value, uint8_t *buf, size_t cap, size_t *written);

/**
 * Encodes the reply `[mu, t]`.
 *
 * # Safety
 * `mu` must hold `d_out` values; `buf` must have `cap` writable bytes;
 * `written` must be writable.
 */
enum GpStatus gp_encode_reply(const double *mu,
                              size_t d_out,
                              double t,
                              uint8_t *buf,
                              size_t cap,
                              size_t *written);

/**
 * Decodes a reply of `d_out` means plus the echoed timestamp.
 *
 * # Safety
 * `bytes` must hold `len` bytes; `mu_out` must have room for `d_out`
 * values; `t_out` must be writable.
 */
enum GpStatus gp_decode_reply(const uint8_t *bytes,
                              size_t len,
                              size_t d_out,
                              double *mu_out,
                              double *t_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GPNODE_H */
