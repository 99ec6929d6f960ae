#ifndef QCA_H
#define QCA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QcaBoundary {
  QCA_BOUNDARY_OPEN = 0,
  QCA_BOUNDARY_PERIODIC = 1,
} QcaBoundary;

typedef enum QcaStatus {
  QCA_STATUS_OK = 0,
  QCA_STATUS_NULL_POINTER = 1,
  QCA_STATUS_INVALID_ARGUMENT = 2,
  QCA_STATUS_NUMERICAL = 3,
  QCA_STATUS_PANIC = 4,
} QcaStatus;

typedef enum QcaUnits {
  QCA_UNITS_PI = 0,
  QCA_UNITS_RAW = 1,
} QcaUnits;

/**
 * Opaque rule set.
 */
typedef struct QcaRules QcaRules;

/**
 * Opaque density matrix on a chain.
 */
typedef struct QcaState QcaState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *qca_last_error(void);

/**
 * Static, NUL-terminated library version.
 */
const char *qca_version(void);

/**
 * Builds a rule set from six values `θ⁰,θ¹,θ²,φ̃⁰,φ̃¹,φ̃²` and decay `gamma`.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum QcaStatus qca_rules_new(const double *values,
                             size_t len,
                             enum QcaUnits units,
                             double gamma,
                             struct QcaRules **out);

/**
 * # Safety
 * `rules` must be null or a handle from [`qca_rules_new`] not yet freed.
 */
void qca_rules_free(struct QcaRules *rules);

/**
 * 1 if the rule set has no dissipative terms, 0 otherwise or on null.
 *
 * # Safety
 * `rules` must be null or a live handle.
 */
int32_t qca_rules_is_unitary(const struct QcaRules *rules);

/**
 * Computational-basis state from a string of `0`/`1` characters.
 *
 * # Safety
 * `bits` must be a NUL-terminated string; `out` must be writable.
 */
enum QcaStatus qca_state_from_bitstring(const char *bits,
                                        enum QcaBoundary bc,
                                        struct QcaState **out);

/**
 * `|0…0⟩ ⊗ (|0⟩+|1⟩)/√2 ⊗ |0…0⟩` on an odd chain of `n` sites.
 *
 * # Safety
 * `out` must be writable.
 */
enum QcaStatus qca_state_central_superposition(size_t n,
                                               enum QcaBoundary bc,
                                               struct QcaState **out);

/**
 * # Safety
 * `state` must be null or a live handle.
 */
void qca_state_free(struct QcaState *state);

/**
 * Number of sites, or 0 on null.
 *
 * # Safety
 * `state` must be null or a live handle.
 */
size_t qca_state_n_sites(const struct QcaState *state);

/**
 * Writes `⟨Z_j⟩` for every site into `out[0..len]`; `len` must equal the
 * number of sites.
 *
 * # Safety
 * `state` must be a live handle and `out` writable for `len` doubles.
 */
enum QcaStatus qca_state_magnetization(const struct QcaState *state, double *out, size_t len);

/**
 * Continuous evolution for `duration` model time units, in place.
 *
 * # Safety
 * `state` and `rules` must be live handles.
 */
enum QcaStatus qca_state_evolve(struct QcaState *state,
                                const struct QcaRules *rules,
                                double duration);

/**
 * `steps` block-partitioned updates (sublattice A then B), in place.
 *
 * # Safety
 * `state`, `rules_a` and `rules_b` must be live handles.
 */
enum QcaStatus qca_state_discrete_steps(struct QcaState *state,
                                        const struct QcaRules *rules_a,
                                        const struct QcaRules *rules_b,
                                        size_t steps);

/**
 * Long-time evolution until `‖ℒ[ρ]‖_F < tol` or `t_max`, in place.
 * `converged` and `residual` may be null.
 *
 * # Safety
 * `state` and `rules` must be live handles; non-null outputs writable.
 */
enum QcaStatus qca_state_steady(struct QcaState *state,
                                const struct QcaRules *rules,
                                double tol,
                                double t_max,
                                int32_t *converged,
                                double *residual);

/**
 * Mean nearest-neighbor `Z` covariance.
 *
 * # Safety
 * `state` must be a live handle and `out` writable.
 */
enum QcaStatus qca_state_mean_nn_covariance(const struct QcaState *state, double *out);

/**
 * Phase-optimized GHZ fidelity and the optimal phase.
 *
 * # Safety
 * `state` must be a live handle; `fidelity` writable; `phase` may be null.
 */
enum QcaStatus qca_state_ghz_fidelity(const struct QcaState *state,
                                      double *fidelity,
                                      double *phase);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCA_H */
