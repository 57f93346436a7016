#ifndef TSPERF_H
#define TSPERF_H

#include <stddef.h>
#include <stdint.h>

typedef enum TsperfLearnerKind {
  TSPERF_LEARNER_KIND_LASSO = 0,
  TSPERF_LEARNER_KIND_KNN = 1,
} TsperfLearnerKind;

typedef enum TsperfStatus {
  TSPERF_STATUS_OK = 0,
  TSPERF_STATUS_NULL_POINTER = 1,
  TSPERF_STATUS_INVALID_ARGUMENT = 2,
  TSPERF_STATUS_SERIES_TOO_SHORT = 3,
  TSPERF_STATUS_EMPTY_TRAINING_SET = 4,
  TSPERF_STATUS_IO = 5,
  TSPERF_STATUS_PARSE = 6,
  TSPERF_STATUS_UNKNOWN_METHOD = 7,
  TSPERF_STATUS_NUMERICAL = 8,
  TSPERF_STATUS_PANIC = 99,
} TsperfStatus;

typedef enum TsperfPart {
  TSPERF_PART_TRAIN = 0,
  TSPERF_PART_TEST = 1,
  TSPERF_PART_GAP = 2,
} TsperfPart;

/*
 Opaque resampling plan handle.
 */
typedef struct TsperfPlan TsperfPlan;

/*
 Opaque series handle.
 */
typedef struct TsperfSeries TsperfSeries;

typedef struct TsperfLearner {
  enum TsperfLearnerKind kind;
  /*
   Lasso penalty as a fraction of the smallest all-zero penalty.
   */
  double lambda_fraction;
  size_t neighbours;
} TsperfLearner;

typedef struct TsperfPlanConfig {
  size_t folds;
  size_t nreps;
  /*
   CV-Mod / CV-hvBl removal radius, normally the embedding dimension.
   */
  size_t removal;
  uint64_t seed;
} TsperfPlanConfig;

typedef struct TsperfSignTest {
  double p_left;
  double p_rope;
  double p_right;
  size_t count_left;
  size_t count_rope;
  size_t count_right;
} TsperfSignTest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. The pointer
 stays valid until the next tsperf call on the same thread.
 */
const char *tsperf_last_error(void);

/*
 Library version as a static nul-terminated string.
 */
const char *tsperf_version(void);

struct TsperfLearner tsperf_learner_default(void);

struct TsperfPlanConfig tsperf_plan_config_default(void);

/*
 Copies `len` values into a new series.

 # Safety
 `values` must point to `len` doubles; `name` is null or a nul-terminated
 string; `out` must be writable.
 */
enum TsperfStatus tsperf_series_new(const char *name,
                                    const double *values,
                                    size_t len,
                                    struct TsperfSeries **out);

/*
 Loads column `column` (0-based) of a CSV file.

 # Safety
 `path` must be a nul-terminated string and `out` writable.
 */
enum TsperfStatus tsperf_series_load_csv(const char *path,
                                         size_t column,
                                         struct TsperfSeries **out);

/*
 Number of observations, or 0 for a null handle.

 # Safety
 `s` is null or a live series handle.
 */
size_t tsperf_series_len(const struct TsperfSeries *s);

/*
 Pointer to the observations, valid while the series lives.

 # Safety
 `s` is null or a live series handle.
 */
const double *tsperf_series_values(const struct TsperfSeries *s);

/*
 # Safety
 `s` is null or a handle from this library not yet freed.
 */
void tsperf_series_free(struct TsperfSeries *s);

/*
 Builds the plan of `method` (e.g. "CV-hvBl") over `n` embedded rows.

 # Safety
 `method` must be a nul-terminated string, `config` readable and `out`
 writable.
 */
enum TsperfStatus tsperf_plan_new(const char *method,
                                  size_t n,
                                  const struct TsperfPlanConfig *config,
                                  struct TsperfPlan **out);

/*
 # Safety
 `plan` is null or a live plan handle.
 */
size_t tsperf_plan_iterations(const struct TsperfPlan *plan);

/*
 Row indices of one part of one iteration. The array stays valid while
 the plan lives.

 # Safety
 `plan` must be a live plan handle; `indices` and `len` writable.
 */
enum TsperfStatus tsperf_plan_part(const struct TsperfPlan *plan,
                                   size_t iteration,
                                   enum TsperfPart part,
                                   const size_t **indices,
                                   size_t *len);

/*
 JSON form of the plan; release it with [`tsperf_string_free`].

 # Safety
 `plan` must be a live plan handle and `out` writable.
 */
enum TsperfStatus tsperf_plan_to_json(const struct TsperfPlan *plan, char **out);

/*
 # Safety
 `plan` is null or a handle from this library not yet freed.
 */
void tsperf_plan_free(struct TsperfPlan *plan);

/*
 # Safety
 `s` is null or a string returned by this library not yet freed.
 */
void tsperf_string_free(char *s);

/*
 Loss estimate of `method` on `estimation` with embedding dimension `p`.

 # Safety
 Pointers must be valid as described for the other calls.
 */
enum TsperfStatus tsperf_estimate_loss(const struct TsperfSeries *estimation,
                                       const char *method,
                                       const struct TsperfPlanConfig *config,
                                       const struct TsperfLearner *learner,
                                       size_t p,
                                       double *out);

/*
 Loss of a model trained on `estimation` and scored on `validation`.

 # Safety
 Pointers must be valid as described for the other calls.
 */
enum TsperfStatus tsperf_true_loss(const struct TsperfSeries *estimation,
                                   const struct TsperfSeries *validation,
                                   const struct TsperfLearner *learner,
                                   size_t p,
                                   double *out);

/*
 # Safety
 `predictions` and `actuals` must each point to `len` doubles.
 */
enum TsperfStatus tsperf_rmse(const double *predictions,
                              const double *actuals,
                              size_t len,
                              double *out);

/*
 # Safety
 `differences` must point to `len` doubles and `out` be writable.
 */
enum TsperfStatus tsperf_bayes_sign_test(const double *differences,
                                         size_t len,
                                         double rope_low,
                                         double rope_high,
                                         size_t samples,
                                         double prior_strength,
                                         uint64_t seed,
                                         struct TsperfSignTest *out);

/*
 False Nearest Neighbours dimension. A non-positive `loneliness` drops the
 loneliness criterion.

 # Safety
 `s` must be a live series handle and `out` writable.
 */
enum TsperfStatus tsperf_embedding_dimension(const struct TsperfSeries *s,
                                             size_t max_dimension,
                                             double tolerance,
                                             double ratio_threshold,
                                             double loneliness,
                                             size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TSPERF_H */
