/* Copyright 2026 The qtraj Authors
 * SPDX-License-Identifier: Apache-2.0 */

#ifndef QTRAJ_H
#define QTRAJ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QtStatus {
  QT_STATUS_OK = 0,
  QT_STATUS_NULL_POINTER = 1,
  QT_STATUS_INVALID_ARGUMENT = 2,
  QT_STATUS_DIMENSION_MISMATCH = 3,
  QT_STATUS_NEAR_ZERO_NORM = 4,
  QT_STATUS_STEP_TOO_LARGE = 5,
  QT_STATUS_NON_HERMITIAN = 6,
  /**
   * The trajectory was discarded because a state norm vanished.
   */
  QT_STATUS_DISCARDED = 7,
  QT_STATUS_INTERNAL = 8,
  QT_STATUS_PANIC = 9,
} QtStatus;

typedef enum QtDriftMode {
  QT_DRIFT_MODE_BACKWARD_WALK = 0,
  QT_DRIFT_MODE_VERBATIM = 1,
} QtDriftMode;

/**
 * Opaque Lindblad model.
 */
typedef struct QtModel QtModel;

/**
 * Opaque forward/backward trajectory pair with its entropy ledger.
 */
typedef struct QtTrajectory QtTrajectory;

/**
 * Run parameters. `initial_basis < 0` draws the random two-level state;
 * `threads == 0` uses every core.
 */
typedef struct QtRunSpec {
  size_t n_trajectories;
  double dt;
  double horizon;
  uint64_t master_seed;
  enum QtDriftMode drift_mode;
  int64_t initial_basis;
  size_t threads;
} QtRunSpec;

/**
 * Driven two-level atom, all times and rates in the same units.
 */
typedef struct QtTwoLevelParams {
  double omega0;
  double tau;
  double g1;
  double tau1;
  double g2;
  double tau2;
} QtTwoLevelParams;

typedef struct QtTransition {
  size_t lower;
  size_t upper;
  double down_rate;
  double up_rate;
} QtTransition;

typedef struct QtEstimate {
  double mean;
  double std_error;
  double zeta;
  double quantile_95;
  size_t n_trajectories;
  size_t n_discarded;
  bool unreliable;
} QtEstimate;

typedef struct QtJump {
  size_t step;
  double time;
  size_t channel;
} QtJump;

typedef struct QtLedger {
  size_t n_jumps;
  double jump_flux;
  double drift_flux;
  double thermal_total;
  double nonthermal_jump_total;
  double kappa_sum;
} QtLedger;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *qt_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qt_version(void);

/**
 * Fills `out` with the defaults: random two-level initial state, backward-walk
 * drift, all cores.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum QtStatus qt_run_spec_default(size_t n_trajectories,
                                  double dt,
                                  double horizon,
                                  uint64_t master_seed,
                                  struct QtRunSpec *out);

/**
 * # Safety
 * `p` must point to a valid struct and `out` must be valid for writes.
 */
enum QtStatus qt_model_two_level_direct(const struct QtTwoLevelParams *p, struct QtModel **out);

/**
 * # Safety
 * `p` must point to a valid struct and `out` must be valid for writes.
 */
enum QtStatus qt_model_two_level_homodyne(const struct QtTwoLevelParams *p,
                                          double beta_re,
                                          double beta_im,
                                          struct QtModel **out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum QtStatus qt_model_two_level_thermal(double omega0,
                                         double tau,
                                         double mean_photon_number,
                                         double rate_scale,
                                         struct QtModel **out);

/**
 * # Safety
 * `energies` must hold `n_levels` doubles, `transitions` must hold
 * `n_transitions` entries, and `out` must be valid for writes.
 */
enum QtStatus qt_model_eigenstate_jump(const double *energies,
                                       size_t n_levels,
                                       const struct QtTransition *transitions,
                                       size_t n_transitions,
                                       struct QtModel **out);

/**
 * Builds the model described by a JSON experiment config at sweep point
 * `point` (ignored without a sweep block) and fills `spec` from its run block.
 * `spec` may be null.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum QtStatus qt_model_from_config(const char *json,
                                   size_t point,
                                   struct QtModel **out,
                                   struct QtRunSpec *spec);

/**
 * Hilbert-space dimension, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t qt_model_dim(const struct QtModel *model);

/**
 * Number of jump channels, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t qt_model_n_channels(const struct QtModel *model);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void qt_model_free(struct QtModel *model);

/**
 * Estimates `<W>` over `spec->n_trajectories` trajectory pairs.
 *
 * # Safety
 * `model` must be a live handle, `spec` valid, `out` valid for writes.
 */
enum QtStatus qt_estimate(const struct QtModel *model,
                          const struct QtRunSpec *spec,
                          struct QtEstimate *out);

/**
 * Simulates trajectory `index` of the run described by `spec`, the same pair
 * that [`qt_estimate`] uses. Returns [`QtStatus::Discarded`] with `*out`
 * set to null when the pair is discarded.
 *
 * # Safety
 * `model` must be a live handle, `spec` valid, `out` valid for writes.
 */
enum QtStatus qt_trajectory_simulate(const struct QtModel *model,
                                     const struct QtRunSpec *spec,
                                     uint64_t index,
                                     struct QtTrajectory **out);

/**
 * `ln W` of the pair, or NaN for a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
double qt_trajectory_log_weight(const struct QtTrajectory *traj);

/**
 * Number of forward jumps, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t qt_trajectory_n_jumps(const struct QtTrajectory *traj);

/**
 * Forward jump `i`.
 *
 * # Safety
 * `traj` must be a live handle and `out` valid for writes.
 */
enum QtStatus qt_trajectory_jump(const struct QtTrajectory *traj, size_t i, struct QtJump *out);

/**
 * Final forward state as interleaved `(re, im)` pairs; `buf` must hold
 * `2 * dim` doubles.
 *
 * # Safety
 * `traj` must be a live handle and `buf` valid for `len` writes.
 */
enum QtStatus qt_trajectory_final_state(const struct QtTrajectory *traj, double *buf, size_t len);

/**
 * Entropy-ledger totals for the pair.
 *
 * # Safety
 * `traj` must be a live handle and `out` valid for writes.
 */
enum QtStatus qt_trajectory_ledger(const struct QtTrajectory *traj, struct QtLedger *out);

/**
 * The pair as a JSON document. Release with [`qt_string_free`].
 *
 * # Safety
 * `traj` must be a live handle and `out` valid for writes.
 */
enum QtStatus qt_trajectory_to_json(const struct QtTrajectory *traj, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void qt_string_free(char *s);

/**
 * # Safety
 * `traj` must be null or a handle not yet freed.
 */
void qt_trajectory_free(struct QtTrajectory *traj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QTRAJ_H */
