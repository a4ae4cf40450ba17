#ifndef MWG_H
#define MWG_H

#include <stddef.h>
#include <stdint.h>

#define MWG_OK 0

/**
 * A required pointer argument was null.
 */
#define MWG_ERR_NULL 1

/**
 * Invalid argument or configuration.
 */
#define MWG_ERR_INVALID 2

/**
 * Numerical failure (non-finite values, factorization failure, I/O).
 */
#define MWG_ERR_NUMERICAL 3

/**
 * A Rust panic was caught at the boundary.
 */
#define MWG_ERR_PANIC 4

/**
 * Log-Gaussian Cox posterior on an `L × L` grid with default prior
 * parameters and data simulated from `data_seed`.
 */
typedef struct MwgCoxModel MwgCoxModel;

/**
 * Elliptic inverse problem in KL coordinates (setup 1 or 2) with data
 * simulated from `data_seed`.
 */
typedef struct MwgPdeModel MwgPdeModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next `mwg_` call on the same thread.
 */
const char *mwg_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void mwg_string_free(char *s);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
int32_t mwg_cox_new(size_t side, uint64_t data_seed, struct MwgCoxModel **out_model);

/**
 * # Safety
 * `model` must come from [`mwg_cox_new`] and not have been freed; null is ignored.
 */
void mwg_cox_free(struct MwgCoxModel *model);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
int32_t mwg_pde_new(uint32_t setup, uint64_t data_seed, struct MwgPdeModel **out_model);

/**
 * # Safety
 * `model` must come from [`mwg_pde_new`] and not have been freed; null is ignored.
 */
void mwg_pde_free(struct MwgPdeModel *model);

/**
 * # Safety
 * `model` must be a live handle or null; `out_dim` must be valid.
 */
int32_t mwg_cox_dim(const struct MwgCoxModel *model, size_t *out_dim);

/**
 * Log-posterior (up to a constant) and, when `out_grad` is non-null, its
 * gradient written to `n` doubles.
 *
 * # Safety
 * `x` must point to `n` doubles, `out_grad` to `n` doubles or be null.
 */
int32_t mwg_cox_log_density(const struct MwgCoxModel *model,
                            const double *x,
                            size_t n,
                            double *out_log_density,
                            double *out_grad);

/**
 * # Safety
 * As [`mwg_cox_dim`].
 */
int32_t mwg_pde_dim(const struct MwgPdeModel *model, size_t *out_dim);

/**
 * # Safety
 * As [`mwg_cox_log_density`].
 */
int32_t mwg_pde_log_density(const struct MwgPdeModel *model,
                            const double *theta,
                            size_t n,
                            double *out_log_density,
                            double *out_grad);

/**
 * `λ_min(−H)` for the 1D exponential-kernel Gaussian `exp(-|i-j|/(2ℓ))`
 * of dimension `n` partitioned into blocks of size `q`.
 *
 * # Safety
 * `out_margin` must be valid.
 */
int32_t mwg_concavity_margin(size_t n, double ell, size_t q, double *out_margin);

/**
 * Integrated autocorrelation time of a series of length `n` (at least 100).
 *
 * # Safety
 * `series` must point to `n` doubles.
 */
int32_t mwg_iact(const double *series, size_t n, double *out_iact);

/**
 * Runs an experiment command (`sample`, `couple`, `sweep-tau` or `map`)
 * configured by a TOML document and returns its result as JSON.
 *
 * # Safety
 * `command` and `config_toml` must be NUL-terminated; `out_json` valid.
 */
int32_t mwg_run_experiment(const char *command, const char *config_toml, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MWG_H */
