#ifndef KINCAL_H
#define KINCAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum KcStatus {
  KC_STATUS_OK = 0,
  KC_STATUS_NULL_POINTER = 1,
  KC_STATUS_INVALID_ARGUMENT = 2,
  KC_STATUS_PARSE_ERROR = 3,
  KC_STATUS_SIMULATION_FAILED = 4,
  KC_STATUS_IO_ERROR = 5,
  KC_STATUS_PANIC = 6,
} KcStatus;

/**
 * A chain loaded from disk.
 */
typedef struct KcChain KcChain;

/**
 * A parsed reaction mechanism.
 */
typedef struct KcMechanism KcMechanism;

/**
 * A posterior problem: mechanism, active parameters, prior and targets.
 */
typedef struct KcProblem KcProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *kc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *kc_version(void);

/**
 * Creates a handle holding the bundled baseline mechanism.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum KcStatus kc_mechanism_baseline(struct KcMechanism **out);

/**
 * Parses mechanism text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` writable.
 */
enum KcStatus kc_mechanism_parse(const char *text, struct KcMechanism **out);

/**
 * Releases a mechanism handle. Null is ignored.
 *
 * # Safety
 * `m` must be null or a handle from this library not yet freed.
 */
void kc_mechanism_free(struct KcMechanism *m);

/**
 * Number of species, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t kc_mechanism_n_species(const struct KcMechanism *m);

/**
 * Number of reactions (duplicate lines count once), or 0 for null.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t kc_mechanism_n_reactions(const struct KcMechanism *m);

/**
 * Forward and reverse rate constants and net rates at temperature `t` (K)
 * and concentrations `conc` (mol/cm^3, mechanism species order). Output
 * arrays hold `n_reactions` values each; any of them may be null.
 *
 * # Safety
 * `conc` must point to `n_species` doubles and each non-null output to
 * `n_reactions` doubles.
 */
enum KcStatus kc_rates(const struct KcMechanism *m,
                       double t,
                       const double *conc,
                       size_t n_species,
                       double *kf,
                       double *kr,
                       double *q,
                       size_t n_reactions);

/**
 * Simulates the single target defined in `case_text` (problem-file
 * grammar) with mechanism `m` and stores the observable in `out`.
 *
 * # Safety
 * `case_text` must be NUL-terminated; `out` writable.
 */
enum KcStatus kc_simulate(const struct KcMechanism *m, const char *case_text, double *out);

/**
 * Builds a posterior problem from problem-file text. The mechanism handle
 * is copied; pass null to use the bundled baseline.
 *
 * # Safety
 * `text` must be NUL-terminated; `m` null or live; `out` writable.
 */
enum KcStatus kc_problem_new(const char *text, const struct KcMechanism *m, struct KcProblem **out);

/**
 * # Safety
 * `p` must be null or a handle from this library not yet freed.
 */
void kc_problem_free(struct KcProblem *p);

/**
 * Number of active parameters, or 0 for null.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t kc_problem_dim(const struct KcProblem *p);

/**
 * Prior means of the active parameters.
 *
 * # Safety
 * `out` must point to `n` writable doubles.
 */
enum KcStatus kc_problem_prior_means(const struct KcProblem *p, double *out, size_t n);

/**
 * Log-posterior (up to a constant) at `theta`; −inf outside the prior
 * bounds or when a target simulation fails.
 *
 * # Safety
 * `theta` must point to `n` doubles; `out` writable.
 */
enum KcStatus kc_problem_log_posterior(const struct KcProblem *p,
                                       const double *theta,
                                       size_t n,
                                       double *out);

/**
 * Loads a chain file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` writable.
 */
enum KcStatus kc_chain_load(const char *path, struct KcChain **out);

/**
 * # Safety
 * `c` must be null or a handle from this library not yet freed.
 */
void kc_chain_free(struct KcChain *c);

/**
 * Walker count, parameter count and number of stored records.
 *
 * # Safety
 * Output pointers may be null; non-null ones must be writable.
 */
enum KcStatus kc_chain_shape(const struct KcChain *c,
                             size_t *walkers,
                             size_t *dim,
                             size_t *records);

/**
 * Copies the position of `walker` at stored `record` into `out`.
 *
 * # Safety
 * `out` must point to `n` writable doubles.
 */
enum KcStatus kc_chain_position(const struct KcChain *c,
                                size_t record,
                                size_t walker,
                                double *out,
                                size_t n);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KINCAL_H */
