#ifndef FEDGROUP_H
#define FEDGROUP_H

/*
 * C interface to the fedgroup library: device datasets, entropy-based
 * cluster selection, and FedAvg simulation of flat, three-tier and
 * centralized training.
 *
 * Objects are opaque handles released with their *_free function. Every
 * fallible call returns an fg_status; on failure fg_last_error() describes
 * the problem. Strings returned through char** out-parameters are
 * heap-allocated and must be released with fg_string_free().
 *
 * Structured inputs and outputs (configs, cluster reports, evaluation
 * reports) are JSON documents. Infinite similarity scores are the string
 * "inf" in JSON and INFINITY in double out-parameters.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(FG_BUILDING_LIBRARY)
#define FG_API __attribute__((visibility("default")))
#else
#define FG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes for the command line tool. */
typedef enum fg_status {
    FG_OK = 0,
    FG_ERR_INVALID_ARGUMENT = 1, /* bad argument or configuration */
    FG_ERR_DATA = 2,             /* schema, parse, missing file, too few devices */
    FG_ERR_RUNTIME = 3           /* anything else, e.g. training diverged */
} fg_status;

typedef struct fg_devices fg_devices;
typedef struct fg_model fg_model;
typedef struct fg_run fg_run;

/* Message of the last failure on the calling thread; never NULL. */
FG_API const char* fg_last_error(void);
FG_API const char* fg_version(void);
FG_API void fg_string_free(char* s);

/* ---- label-distribution statistics ---------------------------------- */

FG_API fg_status fg_normalized_entropy(const double* probs, size_t classes, double* out);
FG_API fg_status fg_hellinger(const double* p, const double* q, size_t classes, double* out);
/* `groups` is row-major, n_groups x classes. */
FG_API fg_status fg_similarity_score(const double* groups, size_t n_groups, size_t classes, double* out);

/* ---- device datasets -------------------------------------------------- */

/* options_json: {"top_devices", "schema": {"destination", "source", "label",
 * "timestamp", "drop"}, "skip_bad_rows", "zero_nonfinite", "ratios", "seed"} */
FG_API fg_status fg_devices_ingest_csv(const char* csv_path, const char* options_json, fg_devices** out);
/* spec_json: an explicit synthetic spec or {"skewed": {...}, "seed": n}. */
FG_API fg_status fg_devices_synthesize(const char* spec_json, fg_devices** out);
FG_API fg_status fg_devices_load(const char* dir, fg_devices** out);
FG_API fg_status fg_devices_save(const fg_devices* devices, const char* dir);
/* Devices named in `ids` (keep != 0, in that order) or all others (keep == 0). */
FG_API fg_status fg_devices_select(const fg_devices* devices, const char* const* ids, size_t n_ids, int keep,
                                   fg_devices** out);
FG_API void fg_devices_free(fg_devices* devices);
FG_API size_t fg_devices_count(const fg_devices* devices);
/* Borrowed; NULL when out of range. */
FG_API const char* fg_devices_id(const fg_devices* devices, size_t index);
/* device,samples,<class counts...>,entropy */
FG_API fg_status fg_devices_summary_csv(const fg_devices* devices, char** out);
/* {"alphabet", "feature_names", "devices": [{"id", "label_counts", "sizes"}]} */
FG_API fg_status fg_devices_info_json(const fg_devices* devices, char** out);

/* ---- cluster selection ------------------------------------------------ */

/* group_of_device[d] is the group of device d; n must equal the device count. */
FG_API fg_status fg_score_partition(const fg_devices* devices, const int* group_of_device, size_t n, double* score);
/* search_json: {"realizations", "groups", "seed", "equal_sizes", "dedup"}.
 * Result: {"best": realization, "worst": realization, "scores": [...]}. */
FG_API fg_status fg_select_clusters(const fg_devices* devices, const char* search_json, char** result_json);
/* Result: a single realization object. cap = 0 uses the default cap. */
FG_API fg_status fg_exhaustive_best(const fg_devices* devices, int groups, uint64_t cap, char** result_json);

/* ---- training ----------------------------------------------------------- */

/* fl_json: {"rounds", "local_epochs", "seed", "train": {...}, ...}. */
FG_API fg_status fg_run_federated(const fg_devices* clients, const char* fl_json, fg_run** out);
FG_API fg_status fg_run_three_tier(const fg_devices* devices, const int* group_of_device, size_t n,
                                   const char* fl_json, fg_run** out);
/* centralized_json: {"train": {...}, "seed", "epochs"}. */
FG_API fg_status fg_run_centralized(const fg_devices* devices, const char* centralized_json, fg_run** out);
FG_API void fg_run_free(fg_run* run);
/* Borrowed; valid while the run lives. */
FG_API const fg_model* fg_run_model(const fg_run* run);
/* Number of completed rounds; 0 for centralized runs. */
FG_API size_t fg_run_rounds(const fg_run* run);
/* round,mean_f1,std_f1,loss_<client>...; empty for centralized runs. */
FG_API fg_status fg_run_history_csv(const fg_run* run, char** out);
/* Per-epoch training losses of a centralized run as a JSON array. */
FG_API fg_status fg_run_epoch_losses_json(const fg_run* run, char** out);

/* ---- models and evaluation ------------------------------------------- */

FG_API fg_status fg_model_save(const fg_model* model, const char* path);
FG_API fg_status fg_model_load(const char* path, fg_model** out);
FG_API void fg_model_free(fg_model* model);
/* averaging: "macro" | "weighted"; split: "test" | "val".
 * Report: {"per_client": [{"id", "f1"}], "mean_f1", "std_f1"}. */
FG_API fg_status fg_evaluate(const fg_model* model, const fg_devices* devices, const char* averaging,
                             const char* split, char** report_json);
/* Fails if any unseen device also appears in `training`. */
FG_API fg_status fg_evaluate_generalization(const fg_model* model, const fg_devices* unseen,
                                            const fg_devices* training, const char* averaging,
                                            char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* FEDGROUP_H */
