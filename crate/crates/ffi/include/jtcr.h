#ifndef JTCR_H
#define JTCR_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum JtcrFormat {
  JTCR_FORMAT_CSV = 0,
  JTCR_FORMAT_TSV = 1,
} JtcrFormat;

typedef enum JtcrMode {
  JTCR_MODE_JOINT = 0,
  JTCR_MODE_PHASE1_ONLY = 1,
  JTCR_MODE_NO_VAR = 2,
  JTCR_MODE_NO_GEO = 3,
} JtcrMode;

typedef enum JtcrNormalizer {
  JTCR_NORMALIZER_PAIR_COUNT = 0,
  JTCR_NORMALIZER_POSITIVES = 1,
  JTCR_NORMALIZER_NEGATIVES = 2,
  JTCR_NORMALIZER_ONE = 3,
} JtcrNormalizer;

typedef enum JtcrStatus {
  JTCR_STATUS_OK = 0,
  JTCR_STATUS_NULL_POINTER = 1,
  JTCR_STATUS_INVALID_ARGUMENT = 2,
  JTCR_STATUS_IO = 3,
  JTCR_STATUS_PARSE = 4,
  // Empty or incompatible data, corrupt checkpoint.
  JTCR_STATUS_DATA = 5,
  JTCR_STATUS_DIVERGENCE = 6,
  // A Rust panic was caught at the boundary.
  JTCR_STATUS_PANIC = 7,
} JtcrStatus;

// A filtered check-in dataset together with its chronological split.
typedef struct JtcrDataset JtcrDataset;

// A trained model and its id maps.
typedef struct JtcrModel JtcrModel;

// Training settings. `negative_samples == 0` uses every irrelevant POI.
typedef struct JtcrTrainConfig {
  uintptr_t d;
  double gamma;
  double lambda;
  double alpha;
  uintptr_t max_iter;
  double epsilon;
  uint64_t seed;
  enum JtcrMode mode;
  enum JtcrNormalizer normalizer;
  uintptr_t negative_samples;
} JtcrTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *jtcr_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *jtcr_version(void);

// Parse a check-in file, drop users and POIs below `min_count` check-ins
// and split each user's history chronologically (70/10/20).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum JtcrStatus jtcr_dataset_load(const char *path,
                                  enum JtcrFormat format,
                                  uintptr_t min_count,
                                  struct JtcrDataset **out);

// # Safety
// `ds` must be null or a handle from [`jtcr_dataset_load`] not yet freed.
void jtcr_dataset_free(struct JtcrDataset *ds);

// # Safety
// `ds` must be null or a live dataset handle.
uintptr_t jtcr_dataset_num_users(const struct JtcrDataset *ds);

// # Safety
// `ds` must be null or a live dataset handle.
uintptr_t jtcr_dataset_num_pois(const struct JtcrDataset *ds);

// Check-ins across all three split parts.
//
// # Safety
// `ds` must be null or a live dataset handle.
uintptr_t jtcr_dataset_num_checkins(const struct JtcrDataset *ds);

struct JtcrTrainConfig jtcr_train_config_default(void);

// Train on the dataset's training part.
//
// # Safety
// `ds` and `config` must be live/valid pointers; `out` must be writable.
enum JtcrStatus jtcr_train(const struct JtcrDataset *ds,
                           const struct JtcrTrainConfig *config,
                           struct JtcrModel **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum JtcrStatus jtcr_model_load(const char *path, struct JtcrModel **out);

// Write the model atomically in the binary checkpoint format.
//
// # Safety
// `model` must be a live handle; `path` a NUL-terminated string.
enum JtcrStatus jtcr_model_save(const struct JtcrModel *model, const char *path);

// # Safety
// `model` must be null or a handle not yet freed.
void jtcr_model_free(struct JtcrModel *model);

// # Safety
// `model` must be null or a live handle.
uintptr_t jtcr_model_dim(const struct JtcrModel *model);

// # Safety
// `model` must be null or a live handle.
uintptr_t jtcr_model_num_users(const struct JtcrModel *model);

// # Safety
// `model` must be null or a live handle.
uintptr_t jtcr_model_num_pois(const struct JtcrModel *model);

// # Safety
// `model` must be a live handle; `out` must be writable.
enum JtcrStatus jtcr_model_score(const struct JtcrModel *model,
                                 uintptr_t user,
                                 uintptr_t poi,
                                 double *out);

// Top-`k` POIs for `user`, best first. With a non-null `ds`, POIs the user
// visited in its training part are skipped. Writes up to `k` entries to
// `out_pois` / `out_scores` and the count to `out_len`.
//
// # Safety
// `out_pois` and `out_scores` must have room for `k` elements.
enum JtcrStatus jtcr_recommend(const struct JtcrModel *model,
                               const struct JtcrDataset *ds,
                               uintptr_t user,
                               uintptr_t k,
                               uintptr_t *out_pois,
                               double *out_scores,
                               uintptr_t *out_len);

// Mean Prec@k and nDCG@k over users with test check-ins.
//
// # Safety
// `model` and `ds` must be live handles; the outputs writable.
enum JtcrStatus jtcr_evaluate(const struct JtcrModel *model,
                              const struct JtcrDataset *ds,
                              uintptr_t k,
                              double *out_precision,
                              double *out_ndcg);

// Great-circle distance in km between two points in degrees; NaN for
// invalid coordinates.
double jtcr_haversine_km(double lat1, double lon1, double lat2, double lon2);

// `1 / (1 + distance_km)`; NaN for invalid coordinates.
double jtcr_geo_similarity(double lat1, double lon1, double lat2, double lon2);

// `1 + alpha * exp(similarity)`.
double jtcr_influence_factor(double similarity, double alpha);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JTCR_H */
