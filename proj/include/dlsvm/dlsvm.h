/* dlsvm: malware-image classifiers with an L2-SVM output layer.
 *
 * All functions return dlsvm_status; DLSVM_OK means success and anything
 * else leaves a message in dlsvm_last_error() (thread-local). Out-pointers
 * are written only on success. Handles are freed with their matching
 * *_free function, strings produced by the library with dlsvm_free_string.
 */
#ifndef DLSVM_H
#define DLSVM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define DLSVM_API __declspec(dllexport)
#else
#define DLSVM_API __attribute__((visibility("default")))
#endif

typedef enum dlsvm_status {
  DLSVM_OK = 0,
  DLSVM_ERR_INPUT = 1,     /* missing/unreadable input, bad labels */
  DLSVM_ERR_CONFIG = 2,    /* invalid option values */
  DLSVM_ERR_FORMAT = 3,    /* malformed file contents */
  DLSVM_ERR_NUMERIC = 4,   /* training diverged or produced non-finite values */
  DLSVM_ERR_DIMENSION = 5, /* shape mismatch between tensors or files */
  DLSVM_ERR_INTERNAL = 6
} dlsvm_status;

typedef struct dlsvm_dataset dlsvm_dataset;
typedef struct dlsvm_model dlsvm_model;
typedef struct dlsvm_report dlsvm_report;

DLSVM_API const char* dlsvm_version(void);

/* Message from the most recent failing call on this thread ("" if none). */
DLSVM_API const char* dlsvm_last_error(void);

DLSVM_API void dlsvm_free_string(char* s);

/* Renders a raw binary as an 8-bit grayscale PGM, one byte per pixel,
 * row-major; a trailing partial row is dropped. width 0 picks the standard
 * width for the file size. */
DLSVM_API dlsvm_status dlsvm_render_binary(const char* in_path, const char* out_path,
                                           size_t width);

/* ---- dataset ------------------------------------------------------- */

/* Builds a dataset from <image_root>/<class>/<image.png|.pgm>. Images are
 * resampled to 32x32, split into train/test truncated to full batches
 * (leftovers become the holdout), and standardized per feature with
 * statistics fitted on the training rows (or on everything if fit_on_all). */
DLSVM_API dlsvm_status dlsvm_dataset_build(const char* image_root, double train_frac,
                                           size_t batch, uint64_t seed, int fit_on_all,
                                           dlsvm_dataset** out);

DLSVM_API dlsvm_status dlsvm_dataset_open(const char* path, dlsvm_dataset** out);
DLSVM_API dlsvm_status dlsvm_dataset_save(const dlsvm_dataset* ds, const char* path);
DLSVM_API void dlsvm_dataset_free(dlsvm_dataset* ds);

DLSVM_API size_t dlsvm_dataset_samples(const dlsvm_dataset* ds);
DLSVM_API size_t dlsvm_dataset_dim(const dlsvm_dataset* ds);
DLSVM_API size_t dlsvm_dataset_classes(const dlsvm_dataset* ds);
DLSVM_API const char* dlsvm_dataset_class_name(const dlsvm_dataset* ds, size_t index);

/* split: 0 = train, 1 = test, 2 = holdout */
DLSVM_API size_t dlsvm_dataset_split_size(const dlsvm_dataset* ds, int split);

/* Multi-line plain-text description (sizes, split, per-class counts,
 * feature checksum). */
DLSVM_API dlsvm_status dlsvm_dataset_describe(const dlsvm_dataset* ds, char** out);

/* ---- training ------------------------------------------------------ */

typedef void (*dlsvm_step_fn)(void* user, size_t step, size_t epoch, double loss,
                              double batch_accuracy);

typedef struct dlsvm_train_options {
  const char* model; /* "cnn-svm", "gru-svm", or "mlp-svm" */
  size_t batch;
  size_t epochs;
  double lr;
  double svm_c;
  double keep_prob; /* dropout keep probability; 1 disables dropout */
  uint64_t seed;
  const char* reduction; /* "sum" or "mean" hinge reduction */
  const char* log_path;  /* per-step CSV log, NULL to skip */
  int timing;            /* nonzero: real wall_ms in the log (breaks byte
                            reproducibility of the log, nothing else) */
  dlsvm_step_fn on_step; /* optional progress callback */
  void* user;
} dlsvm_train_options;

/* Fills options with the published defaults for the named model. */
DLSVM_API dlsvm_status dlsvm_train_options_init(dlsvm_train_options* options,
                                                const char* model);

/* Trains on the dataset's training split. The returned model carries the
 * class names and standardization statistics, so it can score raw images
 * directly. */
DLSVM_API dlsvm_status dlsvm_train(const dlsvm_dataset* ds,
                                   const dlsvm_train_options* options, dlsvm_model** out);

/* ---- model --------------------------------------------------------- */

DLSVM_API dlsvm_status dlsvm_model_open(const char* path, dlsvm_model** out);
DLSVM_API dlsvm_status dlsvm_model_save(const dlsvm_model* m, const char* path);
DLSVM_API void dlsvm_model_free(dlsvm_model* m);

DLSVM_API const char* dlsvm_model_kind(const dlsvm_model* m);
DLSVM_API size_t dlsvm_model_classes(const dlsvm_model* m);
DLSVM_API const char* dlsvm_model_class_name(const dlsvm_model* m, size_t index);

/* Classifies one file: PNG and PGM inputs are decoded as images, anything
 * else is rendered from its raw bytes like the training data. scores may be
 * NULL; otherwise it receives dlsvm_model_classes() values. */
DLSVM_API dlsvm_status dlsvm_predict_file(const dlsvm_model* m, const char* image_path,
                                          size_t* label, double* scores);

/* ---- evaluation ---------------------------------------------------- */

/* split as in dlsvm_dataset_split_size, or 3 for every sample. */
DLSVM_API dlsvm_status dlsvm_evaluate(const dlsvm_model* m, const dlsvm_dataset* ds,
                                      int split, dlsvm_report** out);
DLSVM_API void dlsvm_report_free(dlsvm_report* r);

DLSVM_API double dlsvm_report_accuracy(const dlsvm_report* r);
DLSVM_API size_t dlsvm_report_total(const dlsvm_report* r);
DLSVM_API size_t dlsvm_report_classes(const dlsvm_report* r);

/* what: 0 = precision, 1 = recall, 2 = f1, 3 = support. Undefined ratios
 * (empty class or empty prediction column) read as 0. */
DLSVM_API double dlsvm_report_class_metric(const dlsvm_report* r, size_t index, int what);

/* row = true class, column = predicted class */
DLSVM_API size_t dlsvm_report_confusion(const dlsvm_report* r, size_t row, size_t col);

/* kind: 0 = aligned text table, 1 = per-class CSV, 2 = confusion CSV,
 * 3 = confusion heatmap SVG. */
DLSVM_API dlsvm_status dlsvm_report_render(const dlsvm_report* r, int kind, char** out);

/* ---- gradient check ------------------------------------------------ */

/* Sweeps every parameter of a scaled-down model of the named architecture
 * against central differences in double precision. pass_out receives 1 when
 * the worst relative error stays within threshold. report_out (optional)
 * receives the per-parameter breakdown. */
DLSVM_API dlsvm_status dlsvm_gradcheck(const char* model, uint64_t seed, double eps,
                                       double threshold, int* pass_out, char** report_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DLSVM_H */
