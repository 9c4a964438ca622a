#ifndef VESSELNET_H
#define VESSELNET_H

/* C interface to the vesselnet library.
 *
 * Every function returns a vn_status. On failure the message is available
 * from vn_last_error() on the calling thread until the next failing call.
 * Handles are opaque and owned by the caller; free them with the matching
 * *_free function (NULL is accepted).
 *
 * Output paths that are relative are placed under $VESSELNET_OUTPUT_ROOT
 * when that variable is set.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VN_API __declspec(dllexport)
#else
#define VN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vn_status {
  VN_OK = 0,
  VN_ERR_INVALID_ARGUMENT = 2,
  VN_ERR_IO = 3,
  VN_ERR_FORMAT = 4,
  VN_ERR_CONFIG = 5,
  VN_ERR_SHAPE = 6,
  VN_ERR_INTERNAL = 7
} vn_status;

VN_API const char* vn_version(void);
VN_API const char* vn_status_name(vn_status status);
VN_API const char* vn_last_error(void);

/* Writes the resolved form of an output path (see above) into buf. */
VN_API vn_status vn_output_path(const char* path, char* buf, size_t cap);

/* ---- volumes ---------------------------------------------------------- */

typedef struct vn_volume vn_volume;

VN_API vn_status vn_volume_create(uint32_t depth, uint32_t height, uint32_t width, vn_volume** out);
VN_API vn_status vn_volume_load(const char* path, vn_volume** out);
VN_API vn_status vn_volume_save(const vn_volume* volume, const char* path);
VN_API vn_status vn_volume_dims(const vn_volume* volume, uint32_t dims[3]);
VN_API vn_status vn_volume_get(const vn_volume* volume, uint32_t d, uint32_t h, uint32_t w, int* on);
VN_API vn_status vn_volume_set(vn_volume* volume, uint32_t d, uint32_t h, uint32_t w, int on);
VN_API vn_status vn_volume_count(const vn_volume* volume, uint64_t* count);
VN_API void vn_volume_free(vn_volume* volume);

/* Orthographic projections written as <prefix>_frontal.pgm,
 * <prefix>_transverse.pgm and <prefix>_sagittal.pgm. With rows = cols = 0
 * the native projection sizes are kept; otherwise each view is resized
 * (nearest neighbour) after an optional OR-downsample (downsample may be
 * NULL). */
VN_API vn_status vn_project_pgm(const vn_volume* volume, const uint32_t* downsample, size_t rows, size_t cols,
                                const char* prefix);

/* ---- metrics ---------------------------------------------------------- */

typedef struct vn_seg_result {
  uint64_t tp, fp, fn, tn;
  double dice;
  double jaccard;
} vn_seg_result;

VN_API vn_status vn_segeval(const vn_volume* prediction, const vn_volume* truth, vn_seg_result* out);

/* Reads a CSV with columns "score" and "label" (other columns ignored),
 * optionally keeping only rows whose "filter_column" equals filter_value
 * (both may be NULL). Writes an SVG plot and, if points_csv is not NULL,
 * the fpr,tpr points. */
VN_API vn_status vn_roc_plot(const char* scores_csv, const char* filter_column, const char* filter_value,
                             const char* svg_path, const char* points_csv, const char* title, double* auc);

/* ---- synthetic data --------------------------------------------------- */

/* canvas may be NULL for the default 256x128x256. */
VN_API vn_status vn_synth_write(const char* dir, size_t n_per_class, double separation, uint64_t seed,
                                const uint32_t* canvas);

/* ---- experiments ------------------------------------------------------ */

typedef void (*vn_log_fn)(const char* line, void* user);

/* command is "train3d", "train2d" or "ablate"; config_text is a key/value
 * experiment config. The whole config is validated before any work. */
VN_API vn_status vn_experiment_run(const char* command, const char* config_text, const char* origin,
                                   const char* out_dir, vn_log_fn log, void* user);

/* Validation only; writes the resolved config text into buf when not NULL. */
VN_API vn_status vn_experiment_check(const char* command, const char* config_text, const char* origin, char* buf,
                                     size_t cap);

/* ---- models ----------------------------------------------------------- */

typedef struct vn_model vn_model;

VN_API vn_status vn_model_load(const char* checkpoint_path, vn_model** out);
VN_API vn_status vn_model_kind(const vn_model* model, const char** kind);
/* Eval-mode logits for one mask volume, prepared as recorded in the
 * checkpoint. out must hold `cap` floats; count receives the class count. */
VN_API vn_status vn_model_logits(vn_model* model, const vn_volume* volume, float* out, size_t cap, size_t* count);
/* Evaluates on a dataset directory and writes an EvalReport CSV, plus a
 * sample,label,score CSV when scores_csv is not NULL. auc is set to NaN
 * when the data hold a single class. */
VN_API vn_status vn_model_evaluate(vn_model* model, const char* data_dir, const char* report_csv,
                                   const char* scores_csv, double* auc);
VN_API void vn_model_free(vn_model* model);

#ifdef __cplusplus
}
#endif

#endif
