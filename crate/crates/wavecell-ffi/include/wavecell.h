/* C interface to the wavecell immersed spectral-cell solver.
* Generated by cbindgen; edit the Rust source, not this file. */

#ifndef WAVECELL_H
#define WAVECELL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Success.
 */
#define WC_OK 0

/**
 * NULL handle, malformed string, out-of-range index, or internal fault.
 */
#define WC_ERR_ARGUMENT 1

/**
 * Configuration rejected (same meaning as CLI exit code 2).
 */
#define WC_ERR_CONFIG 2

/**
 * Numerical failure during integration (same meaning as CLI exit code 3).
 */
#define WC_ERR_NUMERICAL 3

/**
 * Opaque handle over a completed run.
 */
typedef struct WcRun WcRun;

/**
 * Opaque handle over a configured scenario.
 */
typedef struct WcScenario WcScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Error code of the most recent call on this thread: 0 success, 1 invalid
 * argument or internal fault, 2 configuration error, 3 numerical failure.
 */
int32_t wc_last_error_code(void);

/**
 * Human-readable message for the most recent failure on this thread; the
 * empty string after a success. The pointer stays valid until the next
 * wavecell call on the same thread.
 */
const char *wc_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *wc_version(void);

/**
 * Creates a built-in scenario: `name` is "plate" (randomized perforated
 * plate, `seed` selects the hole layout) or "block3d" (3-D block with
 * spherical voids, `seed` ignored). Nonzero `desk` selects the small
 * CI-scale mesh. Returns NULL on error.
 *
 * # Safety
 * `name` must be NULL or point to a NUL-terminated string.
 */
struct WcScenario *wc_scenario_builtin(const char *name, uint64_t seed, bool desk);

/**
 * Parses scenario config text (the same `key = value` format the CLI
 * accepts with `--config`) into a scenario. Returns NULL on error.
 *
 * # Safety
 * `text` must be NULL or point to a NUL-terminated string.
 */
struct WcScenario *wc_scenario_from_config(const char *text);

/**
 * Overrides the time step. Pass a positive value; the default (stability
 * bound times 0.9) is restored by never calling this.
 *
 * # Safety
 * `scenario` must be NULL or a live handle from this library.
 */
int32_t wc_scenario_set_dt(struct WcScenario *scenario, double dt);

/**
 * Selects the integrator: "cdm", "cdm-hrz", "trapezoidal", "imex" or
 * "leapfrog".
 *
 * # Safety
 * `scenario` must be NULL or a live handle from this library; `name` must
 * be NULL or point to a NUL-terminated string.
 */
int32_t wc_scenario_set_integrator(struct WcScenario *scenario, const char *name);

/**
 * Sets the substep count used by the leap-frog integrator.
 *
 * # Safety
 * `scenario` must be NULL or a live handle from this library.
 */
int32_t wc_scenario_set_substeps(struct WcScenario *scenario, uintptr_t m);

/**
 * Assembles the system and reports the critical time steps: the global
 * bound (all modes) into `dt_global`, and the explicit-subsystem bound
 * governing the mixed integrator into `dt_explicit` (NaN when every DOF
 * is implicit). Either output pointer may be NULL to skip it.
 *
 * # Safety
 * `scenario` must be NULL or a live handle from this library; the output
 * pointers must each be NULL or valid for writing one double.
 */
int32_t wc_scenario_critical_dt(const struct WcScenario *scenario,
                                double *dt_global,
                                double *dt_explicit);

/**
 * Runs the scenario to completion. Returns a run handle, or NULL on error
 * (configuration problems give code 2, detected instability code 3).
 *
 * # Safety
 * `scenario` must be NULL or a live handle from this library.
 */
struct WcRun *wc_scenario_run(const struct WcScenario *scenario);

/**
 * Frees a scenario handle. NULL is accepted and ignored.
 *
 * # Safety
 * `scenario` must be NULL or a live handle from this library; the handle
 * must not be used afterwards.
 */
void wc_scenario_free(struct WcScenario *scenario);

/**
 * Number of degrees of freedom of the assembled system.
 *
 * # Safety
 * `run` must be NULL or a live handle from this library.
 */
uintptr_t wc_run_n_dof(const struct WcRun *run);

/**
 * Number of time steps taken.
 *
 * # Safety
 * `run` must be NULL or a live handle from this library.
 */
uintptr_t wc_run_n_steps(const struct WcRun *run);

/**
 * Time step the run actually used.
 *
 * # Safety
 * `run` must be NULL or a live handle from this library.
 */
double wc_run_dt(const struct WcRun *run);

/**
 * Wall-clock seconds spent in factorization plus time stepping.
 *
 * # Safety
 * `run` must be NULL or a live handle from this library.
 */
double wc_run_wall_seconds(const struct WcRun *run);

/**
 * Number of receiver traces recorded.
 *
 * # Safety
 * `run` must be NULL or a live handle from this library.
 */
uintptr_t wc_run_n_receivers(const struct WcRun *run);

/**
 * Recorded sample times. Writes the length to `len` (may be NULL) and
 * returns a pointer into the run handle, valid until the handle is freed.
 *
 * # Safety
 * `run` must be NULL or a live handle from this library; `len` must be
 * NULL or valid for writing one size value.
 */
const double *wc_run_times(const struct WcRun *run, uintptr_t *len);

/**
 * Trace of receiver `index`, aligned with `wc_run_times`. Returns NULL if
 * the index is out of range.
 *
 * # Safety
 * `run` must be NULL or a live handle from this library; `len` must be
 * NULL or valid for writing one size value.
 */
const double *wc_run_trace(const struct WcRun *run, uintptr_t index, uintptr_t *len);

/**
 * Elastic energy per recorded step, aligned with `wc_run_times`.
 *
 * # Safety
 * `run` must be NULL or a live handle from this library; `len` must be
 * NULL or valid for writing one size value.
 */
const double *wc_run_energies(const struct WcRun *run, uintptr_t *len);

/**
 * Evaluates the final displacement field at physical point (x, y, z);
 * pass 0 for unused trailing coordinates. Writes the value to `value`.
 *
 * # Safety
 * `run` must be NULL or a live handle from this library; `value` must be
 * NULL or valid for writing one double.
 */
int32_t wc_run_field_at(const struct WcRun *run, double x, double y, double z, double *value);

/**
 * Writes receivers.csv, energy.csv, error.csv and report.txt into `dir`
 * (created if missing) — the same artifact set the CLI produces.
 *
 * # Safety
 * `run` must be NULL or a live handle from this library; `dir` must be
 * NULL or point to a NUL-terminated string.
 */
int32_t wc_run_write_artifacts(const struct WcRun *run, const char *dir);

/**
 * Frees a run handle. NULL is accepted and ignored.
 *
 * # Safety
 * `run` must be NULL or a live handle from this library; the handle must
 * not be used afterwards.
 */
void wc_run_free(struct WcRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAVECELL_H */
