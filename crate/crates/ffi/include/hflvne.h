#ifndef HFLVNE_H
#define HFLVNE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HvStatus {
  HV_STATUS_OK = 0,
  HV_STATUS_NULL_POINTER = 1,
  HV_STATUS_INVALID_ARGUMENT = 2,
  HV_STATUS_IO = 3,
  HV_STATUS_PARSE = 4,
  HV_STATUS_CONFIG = 5,
  HV_STATUS_RUNTIME = 6,
  HV_STATUS_PANIC = 7,
} HvStatus;

typedef enum HvPolicy {
  HV_POLICY_HFL = 0,
  HV_POLICY_NODE_RANK = 1,
  HV_POLICY_RANDOM = 2,
} HvPolicy;

/**
 * Opaque checkpoint handle.
 */
typedef struct HvCheckpoint HvCheckpoint;

/**
 * Opaque substrate handle.
 */
typedef struct HvSubstrate HvSubstrate;

/**
 * Opaque VNR stream handle.
 */
typedef struct HvVnrs HvVnrs;

/**
 * Whole-run indicators. Undefined ratios are NaN.
 */
typedef struct HvSummary {
  double ltar;
  double ltar2c;
  double acc;
  uint64_t accepted;
  uint64_t total;
} HvSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *hv_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hv_version(void);

/**
 * Loads a substrate file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HvStatus hv_substrate_load(const char *path, struct HvSubstrate **out);

/**
 * Generates a substrate with default resource ranges.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HvStatus hv_substrate_generate(uint64_t seed,
                                    size_t num_domains,
                                    size_t nodes_per_domain,
                                    size_t total_links,
                                    struct HvSubstrate **out);

/**
 * # Safety
 * `s` must be null or a handle from this library not yet freed.
 */
void hv_substrate_free(struct HvSubstrate *s);

/**
 * Node, link and domain counts; any output pointer may be null.
 *
 * # Safety
 * `s` must be a live handle; non-null outputs must be valid.
 */
enum HvStatus hv_substrate_shape(const struct HvSubstrate *s,
                                 size_t *nodes,
                                 size_t *links,
                                 size_t *domains);

/**
 * Available cpu of one node.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
enum HvStatus hv_substrate_node_cpu(const struct HvSubstrate *s, size_t node, double *out);

/**
 * Loads a VNR stream file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HvStatus hv_vnrs_load(const char *path, struct HvVnrs **out);

/**
 * Generates `count` requests with default demand ranges and timing.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HvStatus hv_vnrs_generate(uint64_t seed, size_t count, struct HvVnrs **out);

/**
 * # Safety
 * `v` must be a live handle and `out` a valid pointer.
 */
enum HvStatus hv_vnrs_len(const struct HvVnrs *v, size_t *out);

/**
 * # Safety
 * `v` must be null or a handle from this library not yet freed.
 */
void hv_vnrs_free(struct HvVnrs *v);

/**
 * Loads a parameter checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HvStatus hv_checkpoint_load(const char *path, struct HvCheckpoint **out);

/**
 * Writes the global model as `kernel_0, kernel_1, kernel_2, bias` into
 * `out[0..4]`.
 *
 * # Safety
 * `c` must be a live handle and `out` must point to 4 writable doubles.
 */
enum HvStatus hv_checkpoint_global(const struct HvCheckpoint *c, double *out);

/**
 * # Safety
 * `c` must be null or a handle from this library not yet freed.
 */
void hv_checkpoint_free(struct HvCheckpoint *c);

/**
 * Runs `policy` over the whole stream on a fresh copy of the substrate.
 * `checkpoint` is required for `Hfl` and ignored otherwise; `seed` drives
 * the random policy.
 *
 * # Safety
 * Handles must be live (checkpoint may be null) and `out` valid.
 */
enum HvStatus hv_evaluate(const struct HvSubstrate *substrate,
                          const struct HvVnrs *vnrs,
                          enum HvPolicy policy,
                          const struct HvCheckpoint *checkpoint,
                          uint64_t seed,
                          struct HvSummary *out);

/**
 * Sample-count-weighted average of `n` parameter vectors. `params` holds
 * `n` rows of `kernel_0, kernel_1, kernel_2, bias`; the result goes to
 * `out[0..4]`.
 *
 * # Safety
 * `params` must point to `4 * n` doubles, `counts` to `n` values and `out`
 * to 4 writable doubles.
 */
enum HvStatus hv_aggregate(const double *params, const uint64_t *counts, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HFLVNE_H */
