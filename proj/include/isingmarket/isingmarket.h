#ifndef ISINGMARKET_H
#define ISINGMARKET_H

/* C interface to the isingmarket library. Objects are opaque handles created
 * and destroyed by the library; every call that can fail returns an
 * im_status and leaves a message for im_last_error() on the calling thread. */

#include <stddef.h>
#include <stdint.h>

#if defined(IM_BUILDING_LIBRARY)
#define IM_API __attribute__((visibility("default")))
#else
#define IM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum im_status {
  IM_OK = 0,
  IM_ERR_CONFIG = 2,
  IM_ERR_NUMERIC = 3,
  IM_ERR_NONCONVERGED = 4,
  IM_ERR_IO = 5,
  IM_ERR_INTERNAL = 70
} im_status;

typedef struct im_config im_config;
typedef struct im_params im_params;
typedef struct im_panel im_panel;

IM_API const char* im_version(void);
/* Message of the last failed call on this thread; "" if none. */
IM_API const char* im_last_error(void);

/* ---- run configuration and commands ---------------------------------- */

IM_API im_status im_config_create(im_config** out);
IM_API void im_config_destroy(im_config* cfg);
IM_API im_status im_config_set(im_config* cfg, const char* key, const char* value);
IM_API im_status im_config_load_file(im_config* cfg, const char* path);
/* Number of known keys, and the i-th one (NULL past the end). */
IM_API size_t im_config_key_count(void);
IM_API const char* im_config_key(size_t i);
IM_API size_t im_command_count(void);
IM_API const char* im_command_name(size_t i);

/* Runs a subcommand (ingest, synth, stats, infer, sample, mst, cutoff,
 * scaling, subset-scan, energy, compare, run). IM_ERR_NONCONVERGED is
 * returned only when the config sets strict=on. */
IM_API im_status im_run_command(const im_config* cfg, const char* command);

/* ---- model parameters -------------------------------------------------- */

/* h has n entries, J is n*n row-major, symmetric with zero diagonal. */
IM_API im_status im_params_create(size_t n, const double* h, const double* J, im_params** out);
IM_API im_status im_params_load(const char* path, im_params** out);
IM_API im_status im_params_save(const im_params* p, const char* path);
IM_API void im_params_destroy(im_params* p);
IM_API size_t im_params_size(const im_params* p);
IM_API im_status im_params_get(const im_params* p, double* h, double* J);

/* H(s) = -h's - s'Js for s in {-1,+1}^n. */
IM_API im_status im_params_hamiltonian(const im_params* p, const int8_t* s, double* energy);

/* Metropolis estimates: means (n) and pair moments <s_i s_j> (n*n). */
IM_API im_status im_params_sample(const im_params* p, size_t sweeps, size_t chains, uint64_t seed, double* means,
                                  double* pairs);
/* Exact moments by enumeration, n <= 20. */
IM_API im_status im_params_exact_moments(const im_params* p, double* means, double* pairs);

/* E_ext = -h'm, E_int = -m'Jm for the given magnetizations m. */
IM_API im_status im_params_energy_split(const im_params* p, const double* m, double* e_ext, double* e_int);

/* ---- return panels ---------------------------------------------------- */

IM_API im_status im_panel_load_prices(const char* path, im_panel** out);
IM_API void im_panel_destroy(im_panel* panel);
IM_API size_t im_panel_series(const im_panel* panel);
IM_API size_t im_panel_length(const im_panel* panel);
/* Log returns turned into +/-1 in place (a zero return counts as +1). */
IM_API im_status im_panel_binarize(im_panel* panel);
/* Copies the N x (L-1) returns row-major. */
IM_API im_status im_panel_values(const im_panel* panel, double* out);

/* Infers a model on the window of `size` returns ending at column `last`.
 * `method` is one of exact, nmf, tap, ip, sm; cfg may be NULL for defaults.
 * *converged is optional. */
IM_API im_status im_infer_window(const im_panel* binary, size_t last, size_t size, const char* method,
                                 const im_config* cfg, im_params** out, int* converged);

/* Q_mst of the maximum spanning tree of the couplings of p. sector_ids has
 * one entry per series in [0, sector_count). */
IM_API im_status im_mst_q(const im_params* p, const int* sector_ids, size_t sector_count, double* q);

#ifdef __cplusplus
}
#endif

#endif
