#ifndef ART_H
#define ART_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ArtStatus {
  ART_STATUS_OK = 0,
  ART_STATUS_NULL_POINTER = 1,
  ART_STATUS_INVALID_ARGUMENT = 2,
  ART_STATUS_IO = 3,
  ART_STATUS_PARSE = 4,
  /**
   * Well-formed input the algorithms reject (unknown ids, missing records, ...).
   */
  ART_STATUS_DOMAIN = 5,
  ART_STATUS_PANIC = 6,
} ArtStatus;

/**
 * Train / pool / validation partition handle.
 */
typedef struct ArtPartition ArtPartition;

/**
 * Embedding provider handle.
 */
typedef struct ArtProvider ArtProvider;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *art_last_error(void);

/**
 * Mean beam entropy of `beams × length × vocab` row-major logits.
 *
 * # Safety
 * `values` must point to `beams * length * vocab` doubles and `out` to one.
 */
enum ArtStatus art_entropy(const double *values,
                           size_t beams,
                           size_t length,
                           size_t vocab,
                           double *out);

/**
 * Hashed bag-of-words embeddings of `dimension >= 8`.
 *
 * # Safety
 * `out` must be a valid pointer; the handle is released with
 * [`art_provider_free`].
 */
enum ArtStatus art_provider_builtin(size_t dimension, uint64_t seed, struct ArtProvider **out);

/**
 * Provider backed by a `phrase<TAB>v1 v2 ...` table file.
 *
 * # Safety
 * `table_path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ArtStatus art_provider_from_table(const char *table_path, struct ArtProvider **out);

/**
 * # Safety
 * `provider` must come from an `art_provider_*` constructor, or be null.
 */
void art_provider_free(struct ArtProvider *provider);

/**
 * Cosine similarity of two phrases' embeddings.
 *
 * # Safety
 * Strings must be NUL-terminated; `provider` a live handle; `out` valid.
 */
enum ArtStatus art_similarity(const struct ArtProvider *provider,
                              const char *predicted,
                              const char *ground_truth,
                              double *out);

/**
 * Balanced allocation: `out[i]` slots for predicate `i`. Ties in
 * availability are broken by index.
 *
 * # Safety
 * `availability` and `out` must each hold `n` elements.
 */
enum ArtStatus art_allocate_round_robin(const size_t *availability,
                                        size_t n,
                                        size_t budget,
                                        size_t *out);

/**
 * Recall-weighted allocation: predicate `i` gets a share proportional to
 * `1 - recalls[i]`, capped at `availability[i]`.
 *
 * # Safety
 * `recalls`, `availability` and `out` must each hold `n` elements.
 */
enum ArtStatus art_allocate_budget(const double *recalls,
                                   const size_t *availability,
                                   size_t n,
                                   size_t budget,
                                   size_t *out);

/**
 * # Safety
 * `partition_path` must be NUL-terminated and `out` valid.
 */
enum ArtStatus art_partition_load(const char *partition_path, struct ArtPartition **out);

/**
 * # Safety
 * `partition` must be a live handle and `partition_path` NUL-terminated.
 */
enum ArtStatus art_partition_save(const struct ArtPartition *partition, const char *partition_path);

/**
 * # Safety
 * `partition` must come from this library, or be null.
 */
void art_partition_free(struct ArtPartition *partition);

/**
 * # Safety
 * `partition` must be a live handle; each output pointer valid.
 */
enum ArtStatus art_partition_counts(const struct ArtPartition *partition,
                                    size_t *train,
                                    size_t *pool,
                                    size_t *val);

/**
 * One balanced round of `budget` samples. The input handle is left
 * untouched; the updated partition is returned as a new handle.
 *
 * # Safety
 * `partition` must be a live handle; `out` and `selected` valid.
 */
enum ArtStatus art_partition_sample_balanced(const struct ArtPartition *partition,
                                             size_t budget,
                                             uint64_t seed,
                                             struct ArtPartition **out,
                                             size_t *selected);

/**
 * File-level instruction generation; `config_path` may be null for defaults.
 *
 * # Safety
 * Non-null string arguments must be NUL-terminated.
 */
enum ArtStatus art_gen_instructions(const char *annotations,
                                    const char *vocab,
                                    const char *config_path,
                                    const char *out_path);

/**
 * One adaptive round, writing its artifacts under `out_dir`.
 *
 * # Safety
 * Non-null string arguments must be NUL-terminated; only `config_path`
 * may be null.
 */
enum ArtStatus art_sample_adaptive(const char *partition_path,
                                   const char *records,
                                   const char *recalls,
                                   const char *annotations,
                                   const char *vocab,
                                   const char *config_path,
                                   const char *out_dir);

/**
 * Metrics JSON for a record file. `partition_path` restricts ground truth
 * to the validation split; it and `config_path` may be null.
 *
 * # Safety
 * Non-null string arguments must be NUL-terminated.
 */
enum ArtStatus art_eval(const char *annotations,
                        const char *vocab,
                        const char *records,
                        const char *partition_path,
                        const char *config_path,
                        const char *out_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ART_H */
