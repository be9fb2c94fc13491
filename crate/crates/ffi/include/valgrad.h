#ifndef VALGRAD_H
#define VALGRAD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call; success is zero.
 */
typedef enum VgStatus {
  VG_STATUS_OK = 0,
  VG_STATUS_NULL_POINTER = 1,
  VG_STATUS_INVALID_ARGUMENT = 2,
  VG_STATUS_CONFIG = 3,
  /**
   * A rollout or derivative hit a non-finite or singular quantity.
   */
  VG_STATUS_NUMERIC = 4,
  VG_STATUS_INFEASIBLE = 5,
  VG_STATUS_UNSUPPORTED = 6,
  VG_STATUS_IO = 7,
  VG_STATUS_PANIC = 8,
} VgStatus;

typedef enum VgInputActivation {
  VG_INPUT_ACTIVATION_SIGMOID = 0,
  VG_INPUT_ACTIVATION_IDENTITY = 1,
} VgInputActivation;

typedef enum VgAlgorithm {
  VG_ALGORITHM_VL = 0,
  VG_ALGORITHM_VGL = 1,
  VG_ALGORITHM_VGL_OMEGA = 2,
  VG_ALGORITHM_VGL_RG = 3,
} VgAlgorithm;

typedef struct VgConfig VgConfig;

typedef struct VgLander VgLander;

typedef struct VgMlpCritic VgMlpCritic;

typedef struct VgToyProblem VgToyProblem;

/**
 * Aggregate of a Toy-problem experiment.
 */
typedef struct VgTableRow {
  size_t trials;
  size_t successes;
  /**
   * Percent.
   */
  double success_rate;
  double iterations_mean;
  double iterations_sd;
  double reward_mean;
  double reward_sd;
} VgTableRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *vg_version(void);

/**
 * Copy the calling thread's last error message into `buf` (truncated and
 * always NUL-terminated when `len > 0`). Returns the full message length
 * without the terminator, or 0 if there is none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t vg_last_error_message(char *buf, size_t len);

/**
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum VgStatus vg_toy_new(size_t n, double k, struct VgToyProblem **out);

/**
 * # Safety
 * `p` must be null or a handle from [`vg_toy_new`] not yet freed.
 */
void vg_toy_free(struct VgToyProblem *p);

/**
 * One transition from scalar state `x` at time `t`.
 *
 * # Safety
 * `p` must be a live handle; `x_next` and `reward` must be writable.
 */
enum VgStatus vg_toy_step(const struct VgToyProblem *p,
                          size_t t,
                          double x,
                          double a,
                          double *x_next,
                          double *reward);

/**
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum VgStatus vg_lander_new(double c, struct VgLander **out);

/**
 * # Safety
 * `p` must be null or a handle from [`vg_lander_new`] not yet freed.
 */
void vg_lander_free(struct VgLander *p);

/**
 * Total reward of the optimal trajectory from `(h, v, u)` at step `dt`.
 *
 * # Safety
 * `p` must be a live handle; `reward` and `steps` must be writable.
 */
enum VgStatus vg_lander_oracle(const struct VgLander *p,
                               double h,
                               double v,
                               double u,
                               double dt,
                               double *reward,
                               size_t *steps);

/**
 * Total reward of the critic's greedy policy from `x0 = (h, v, u)`.
 *
 * # Safety
 * Handles must be live; `x0` must point to 3 readable values and `reward`
 * must be writable.
 */
enum VgStatus vg_lander_rollout(const struct VgLander *p,
                                const struct VgMlpCritic *critic,
                                const double *x0,
                                double dt,
                                double *reward);

/**
 * Lander critic with weights drawn from `seed`.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum VgStatus vg_mlp_lander_new(enum VgInputActivation input,
                                uint64_t seed,
                                struct VgMlpCritic **out);

/**
 * # Safety
 * `p` must be null or a handle from [`vg_mlp_lander_new`] not yet freed.
 */
void vg_mlp_free(struct VgMlpCritic *p);

/**
 * Number of weights, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t vg_mlp_num_weights(const struct VgMlpCritic *p);

/**
 * # Safety
 * `p` must be a live handle and `w` must point to `len` writable values.
 */
enum VgStatus vg_mlp_get_weights(const struct VgMlpCritic *p, double *w, size_t len);

/**
 * # Safety
 * `p` must be a live handle and `w` must point to `len` readable values.
 */
enum VgStatus vg_mlp_set_weights(struct VgMlpCritic *p, const double *w, size_t len);

/**
 * Value and state gradient at `x` (3 values).
 *
 * # Safety
 * `p` must be a live handle, `x` and `grad` must point to 3 values and
 * `value` must be writable.
 */
enum VgStatus vg_mlp_eval(const struct VgMlpCritic *p,
                          const double *x,
                          double *value,
                          double *grad);

/**
 * Defaults for experiment `id` (1 to 5).
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum VgStatus vg_config_new(uint8_t id, struct VgConfig **out);

/**
 * # Safety
 * `p` must be null or a handle from [`vg_config_new`] not yet freed.
 */
void vg_config_free(struct VgConfig *p);

/**
 * Set the learning algorithm and its `λ`.
 *
 * # Safety
 * `p` must be a live handle.
 */
enum VgStatus vg_config_set_algorithm(struct VgConfig *p,
                                      enum VgAlgorithm algorithm,
                                      double lambda);

/**
 * Set step size, exploration noise, trial count and seed.
 *
 * # Safety
 * `p` must be a live handle.
 */
enum VgStatus vg_config_set_run(struct VgConfig *p,
                                double alpha,
                                double epsilon,
                                size_t trials,
                                uint64_t seed);

/**
 * # Safety
 * `p` must be a live handle.
 */
enum VgStatus vg_config_validate(const struct VgConfig *p);

/**
 * Run a Toy-problem experiment (1, 2 or 4) and aggregate its trials.
 *
 * # Safety
 * `p` must be a live handle and `row` must be writable.
 */
enum VgStatus vg_run_toy(const struct VgConfig *p, struct VgTableRow *row);

/**
 * Derivative-check suite. `max_rel_err` receives the worst error over all
 * items.
 *
 * # Safety
 * `all_pass` and `max_rel_err` must be writable.
 */
enum VgStatus vg_gradcheck(uint64_t seed, size_t instances, bool *all_pass, double *max_rel_err);

/**
 * Stability of the two-step weight dynamics for preset 0 (A) or 1 (B) at
 * `λ`, with the greedy weighting when `omega` is set.
 *
 * # Safety
 * `stable` and `leading_real` must be writable.
 */
enum VgStatus vg_stability(uint32_t preset,
                           bool omega,
                           double lambda,
                           bool *stable,
                           double *leading_real);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VALGRAD_H */
