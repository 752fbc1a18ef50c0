/* ipanerf: train a compact NeRF, poison its training images so the model
 * renders an attacker-chosen image from one backdoor viewpoint, and evaluate
 * the result over the four view partitions.
 *
 * C interface over the C++ core. All objects are opaque handles; every
 * function returns an ipa_status, and ipa_last_error() describes the most
 * recent failure on the calling thread. Status values double as CLI exit
 * codes.
 */
#ifndef IPANERF_H
#define IPANERF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define IPA_API __declspec(dllexport)
#else
#define IPA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ipa_status {
  IPA_OK = 0,
  IPA_ERROR_ARGUMENT = 2,  /* bad argument, config or file format */
  IPA_ERROR_RUNTIME = 3,   /* divergence or internal failure */
  IPA_ERROR_INCOMPLETE = 4 /* required inputs or run artifacts missing */
} ipa_status;

typedef struct ipa_config ipa_config;
typedef struct ipa_dataset ipa_dataset;
typedef struct ipa_model ipa_model;

IPA_API const char* ipa_version(void);

/* Message for the last failing call on this thread; valid until the next
 * failing call. Never NULL. */
IPA_API const char* ipa_last_error(void);

/* -------------------------------------------------------------------- */
/* configuration                                                        */

IPA_API ipa_status ipa_config_load(const char* path, ipa_config** out);
/* "schedule.epsilon=16" style dotted-key override. */
IPA_API ipa_status ipa_config_set(ipa_config* cfg, const char* assignment);
IPA_API ipa_status ipa_config_set_run_dir(ipa_config* cfg, const char* run_dir);
IPA_API ipa_status ipa_config_set_seed(ipa_config* cfg, uint64_t seed);
IPA_API ipa_status ipa_config_get_run_dir(const ipa_config* cfg, char* buf, size_t cap);
IPA_API void ipa_config_free(ipa_config* cfg);

/* -------------------------------------------------------------------- */
/* datasets                                                             */

IPA_API ipa_status ipa_dataset_open(const ipa_config* cfg, ipa_dataset** out);
IPA_API ipa_status ipa_dataset_load_blender(const char* root, int downsample, ipa_dataset** out);
IPA_API ipa_status ipa_dataset_make_toy(uint64_t seed, int n_train, int n_test, int resolution,
                                        ipa_dataset** out);
IPA_API ipa_status ipa_dataset_counts(const ipa_dataset* ds, int* n_train, int* n_test, int* n_val,
                                      int* width, int* height);
IPA_API ipa_status ipa_dataset_save_blender(const ipa_dataset* ds, const char* dir);
IPA_API void ipa_dataset_free(ipa_dataset* ds);

/* -------------------------------------------------------------------- */
/* models and rendering                                                 */

IPA_API ipa_status ipa_model_load(const char* checkpoint_path, ipa_model** out);
IPA_API ipa_status ipa_model_parameter_count(const ipa_model* model, uint64_t* out);
IPA_API ipa_status ipa_model_render_view(const ipa_model* model, const ipa_dataset* ds, int view_index,
                                         const char* out_png);
IPA_API void ipa_model_free(ipa_model* model);

/* -------------------------------------------------------------------- */
/* metrics                                                              */

IPA_API ipa_status ipa_psnr_png(const char* png_a, const char* png_b, double* out);
IPA_API ipa_status ipa_ssim_png(const char* png_a, const char* png_b, double* out);

/* Optional LPIPS backend. Images are passed as interleaved RGB doubles in
 * [0,1], row-major. Pass fn=NULL to unregister; without a backend reports
 * leave the LPIPS column absent. */
typedef double (*ipa_lpips_fn)(const double* a, const double* b, int width, int height, void* user);
IPA_API void ipa_register_lpips(ipa_lpips_fn fn, void* user);

/* -------------------------------------------------------------------- */
/* experiment commands (one per CLI verb)                               */

IPA_API ipa_status ipa_run_train_clean(const ipa_config* cfg, char* checkpoint_path_out, size_t cap);
/* clean_checkpoint may be NULL when the schedule has no angle constraint. */
IPA_API ipa_status ipa_run_attack(const ipa_config* cfg, const char* clean_checkpoint);
IPA_API ipa_status ipa_run_evaluate(const char* run_dir);
/* pose_spec: "index:<n>" or "spherical:<radius>,<theta_deg>,<phi_deg>" */
IPA_API ipa_status ipa_run_render(const ipa_config* cfg, const char* checkpoint, const char* pose_spec,
                                  const char* out_png);
/* sweep_spec: "epsilon=8,16,32" or "angles=13+15,9+15,3" */
IPA_API ipa_status ipa_run_ablate(const ipa_config* cfg, const char* sweep_spec);

#ifdef __cplusplus
}
#endif

#endif /* IPANERF_H */
