#ifndef EIM_EIM_H
#define EIM_EIM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EIM_API __declspec(dllexport)
#else
#define EIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eim_status {
  EIM_OK = 0,
  EIM_ERR_INVALID_ARGUMENT = 1,
  EIM_ERR_NUMERIC = 2,
  EIM_ERR_IO = 3,
  EIM_ERR_INTERNAL = 4
} eim_status;

/* Opaque trained or loaded model. */
typedef struct eim_model eim_model;

/* Message for the most recent failing call on this thread ("" if none). */
EIM_API const char* eim_last_error(void);
EIM_API const char* eim_version(void);

typedef struct eim_train_config {
  const char* model;  /* "trs", "snis" or "his" */
  const char* target; /* "nine_gaussians", "checkerboard" or "two_rings" */
  int k;
  int t;
  int trs_inner_samples;
  double proposal_mean;
  double proposal_std;
  int train_proposal;
  size_t batch_size;
  double learning_rate;
  int64_t lr_drop_step; /* 0 disables the drop */
  double lr_after_drop;
  int64_t steps;
  int64_t eval_interval;
  size_t eval_samples;
  size_t eval_data;
  size_t eval_batch;
  uint64_t seed;
  double grad_clip; /* 0 disables clipping */
  int threads;
} eim_train_config;

/* Fills the library defaults. String fields point to static storage. */
EIM_API void eim_train_config_default(eim_train_config* config);

typedef struct eim_metric_record {
  int64_t step;
  double objective;
  double eval_bound;
  double eval_se;
  double grad_norm;
  double seconds;
} eim_metric_record;

typedef void (*eim_record_fn)(const eim_metric_record* record, void* user);

/* Trains a model. metrics_csv and checkpoint may be NULL. When training
 * diverges and checkpoint is set, the last good parameters are written there.
 * On success *out owns the model; release it with eim_model_free. */
EIM_API eim_status eim_train(const eim_train_config* config, const char* metrics_csv,
                             const char* checkpoint, eim_record_fn on_record, void* user,
                             eim_model** out);

EIM_API eim_status eim_model_load(const char* path, eim_model** out);
EIM_API eim_status eim_model_save(const eim_model* model, const char* path);
EIM_API void eim_model_free(eim_model* model);

typedef struct eim_model_info {
  char model[8];
  char target[32]; /* empty if the checkpoint does not record it */
  size_t dim;
  int k;
  int t;
  uint64_t seed;
  size_t eval_data;
  size_t eval_samples;
  size_t param_count;
} eim_model_info;

EIM_API eim_status eim_model_get_info(const eim_model* model, eim_model_info* info);

/* n draws written row-major to out[n * dim], from stream (seed, sample). */
EIM_API eim_status eim_model_sample(const eim_model* model, size_t n, uint64_t seed, double* out);

/* Mean n_iwae-sample bound over the n_data held-out points of `seed`. Equals
 * the final evaluation logged by eim_train for the same settings. */
EIM_API eim_status eim_model_evaluate(const eim_model* model, const char* target, size_t n_data,
                                      size_t n_iwae, uint64_t seed, int threads, double* value,
                                      double* se);

/* Exact log density of the target at n points stored row-major in xy[2n]. */
EIM_API eim_status eim_target_log_density(const char* target, const double* xy, size_t n,
                                          double* out);

typedef struct eim_grid_spec {
  double xmin;
  double xmax;
  double ymin;
  double ymax;
  size_t resolution;
} eim_grid_spec;

/* Writes target.csv/target.pgm with the exact target density and, if model is
 * not NULL, model.csv/model.pgm with a histogram of n_samples model draws. */
EIM_API eim_status eim_grid_export(const eim_model* model, const char* target,
                                   const eim_grid_spec* grid, size_t n_samples, uint64_t seed,
                                   const char* out_dir);

/* Bound table CSV: bound,k,estimate,se,oracle,gap. */
EIM_API eim_status eim_bounds_csv(uint64_t seed, size_t n_outer, const char* path);

/* Trains one model per value of `param` ("k" or "t") from base->seed and
 * writes setting,eval_bound,eval_se,seconds. */
EIM_API eim_status eim_sweep(const eim_train_config* base, const char* param, const int* values,
                             size_t count, const char* csv_path);

#ifdef __cplusplus
}
#endif

#endif /* EIM_EIM_H */
