#ifndef XRECAP_H
#define XRECAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum XrecapStatus {
  XRECAP_STATUS_OK = 0,
  XRECAP_STATUS_NULL_POINTER = 1,
  XRECAP_STATUS_INVALID_ARGUMENT = 2,
  XRECAP_STATUS_IO = 3,
  XRECAP_STATUS_FORMAT = 4,
  XRECAP_STATUS_DIM_MISMATCH = 5,
  XRECAP_STATUS_MISSING_ID = 6,
  XRECAP_STATUS_CONFIG = 7,
  XRECAP_STATUS_NETWORK = 8,
  XRECAP_STATUS_NUMERIC = 9,
  XRECAP_STATUS_BUFFER_TOO_SMALL = 10,
  XRECAP_STATUS_INTERNAL = 11,
} XrecapStatus;

/**
 * A trained text projection head.
 */
typedef struct XrecapHead XrecapHead;

/**
 * An embedding store with a nearest-neighbor index over all of its ids.
 */
typedef struct XrecapStore XrecapStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. Valid until
 * the next call into the library from the same thread.
 */
const char *xrecap_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *xrecap_version(void);

/**
 * Open an embedding store (binary or JSON). Vectors are normalized.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum XrecapStatus xrecap_store_open(const char *path, struct XrecapStore **out);

/**
 * # Safety
 * `store` must come from [`xrecap_store_open`] or be NULL.
 */
void xrecap_store_free(struct XrecapStore *store);

/**
 * # Safety
 * `store` must be a live handle or NULL (returns 0).
 */
size_t xrecap_store_len(const struct XrecapStore *store);

/**
 * # Safety
 * `store` must be a live handle or NULL (returns 0).
 */
size_t xrecap_store_dim(const struct XrecapStore *store);

/**
 * Id at position `i`, or NULL when out of range. Owned by the store.
 *
 * # Safety
 * `store` must be a live handle or NULL.
 */
const char *xrecap_store_id(const struct XrecapStore *store, size_t i);

/**
 * Copy the vector for `id` into `out` (`out_len` must equal the dim).
 *
 * # Safety
 * `id` must be NUL-terminated; `out` must hold `out_len` doubles.
 */
enum XrecapStatus xrecap_store_get(const struct XrecapStore *store,
                                   const char *id,
                                   double *out,
                                   size_t out_len);

/**
 * Exact top-`k` cosine neighbors of `query` over the store. Writes store
 * positions to `out_index` and similarities to `out_similarity` (each
 * holding `k` entries) and the number found to `out_count`.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum XrecapStatus xrecap_store_query(const struct XrecapStore *store,
                                     const double *query,
                                     size_t dim,
                                     size_t k,
                                     size_t *out_index,
                                     double *out_similarity,
                                     size_t *out_count);

/**
 * Load a head from a checkpoint file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum XrecapStatus xrecap_head_load(const char *path, struct XrecapHead **out);

/**
 * Seeded initial head (identity plus small noise).
 *
 * # Safety
 * `out` must be writable.
 */
enum XrecapStatus xrecap_head_init(size_t d_text,
                                   size_t d_joint,
                                   uint64_t seed,
                                   struct XrecapHead **out);

/**
 * # Safety
 * `head` must come from this library or be NULL.
 */
void xrecap_head_free(struct XrecapHead *head);

/**
 * # Safety
 * `head` must be a live handle or NULL (returns 0).
 */
size_t xrecap_head_d_text(const struct XrecapHead *head);

/**
 * # Safety
 * `head` must be a live handle or NULL (returns 0).
 */
size_t xrecap_head_d_joint(const struct XrecapHead *head);

/**
 * Project a text feature to a unit vector in the joint space.
 *
 * # Safety
 * `feature` holds `feature_len` doubles; `out` holds `out_len`.
 */
enum XrecapStatus xrecap_head_project(const struct XrecapHead *head,
                                      const double *feature,
                                      size_t feature_len,
                                      double *out,
                                      size_t out_len);

/**
 * Symmetric contrastive loss of `n` unit text/image pairs stored row-major
 * (`n * dim` doubles each).
 *
 * # Safety
 * `text` and `image` hold `n * dim` doubles; `out_loss` is writable.
 */
enum XrecapStatus xrecap_contrastive_loss(const double *text,
                                          const double *image,
                                          size_t n,
                                          size_t dim,
                                          double tau,
                                          double *out_loss);

/**
 * ROUGE F1 for `variant` (`r1`..`r4`, `rL`).
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` is writable.
 */
enum XrecapStatus xrecap_rouge(const char *candidate,
                               const char *reference,
                               const char *variant,
                               double *out);

/**
 * Run every pipeline stage for the TOML config at `config_path`.
 *
 * # Safety
 * `config_path` must be NUL-terminated.
 */
enum XrecapStatus xrecap_pipeline_all(const char *config_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XRECAP_H */
