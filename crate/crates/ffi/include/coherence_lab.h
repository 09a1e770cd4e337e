/* Copyright 2026 The coherence-lab Contributors */
/* SPDX-License-Identifier: Apache-2.0 */

#ifndef COHERENCE_LAB_H
#define COHERENCE_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum ClStatus {
  CL_STATUS_OK = 0,
  CL_STATUS_NULL_POINTER = 1,
  CL_STATUS_INVALID_ARGUMENT = 2,
  CL_STATUS_DOMAIN = 3,
  CL_STATUS_UNSUPPORTED = 4,
  CL_STATUS_NO_STEADY_STATE = 5,
  CL_STATUS_NUMERICAL = 6,
  CL_STATUS_CONFIG = 7,
  CL_STATUS_IO = 8,
  CL_STATUS_BUFFER_TOO_SMALL = 9,
  CL_STATUS_VALIDATION_FAILED = 10,
  CL_STATUS_PANIC = 99,
} ClStatus;

/**
 * Master-equation generators and the exact solution.
 */
typedef enum ClMethod {
  CL_METHOD_EXACT = 0,
  CL_METHOD_BR = 1,
  CL_METHOD_SPBR = 2,
  CL_METHOD_SECULAR = 3,
  CL_METHOD_COLLECTIVE = 4,
  CL_METHOD_INDIVIDUAL = 5,
} ClMethod;

/**
 * A bath with its response cache.
 */
typedef struct ClBath ClBath;

/**
 * Two modes with their frequencies and coupling weights.
 */
typedef struct ClSystem ClSystem;

/**
 * `F_aa, F_bb, Re F_ab, Im F_ab` at one time.
 */
typedef struct ClMoments {
  double f_aa;
  double f_bb;
  double f_ab_re;
  double f_ab_im;
} ClMoments;

/**
 * One pole of the exact propagator.
 */
typedef struct ClPole {
  double re;
  double im;
  /**
   * `|det G^-1|` at the pole.
   */
  double residual;
} ClPole;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cl_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t cl_last_error(char *buf, size_t len);

/**
 * # Safety
 * `out` must be a valid pointer; the handle is released with
 * [`cl_system_free`].
 */
enum ClStatus cl_system_new(double omega_a,
                            double omega_b,
                            double phi_a,
                            double phi_b,
                            struct ClSystem **out);

/**
 * # Safety
 * `sys` must be null or a handle from [`cl_system_new`] not yet freed.
 */
void cl_system_free(struct ClSystem *sys);

/**
 * Super-Ohmic bath `J = j0 (nu/omega0)^z exp(-nu/omega0)` at temperature `kbt`.
 *
 * # Safety
 * `out` must be a valid pointer; release with [`cl_bath_free`].
 */
enum ClStatus cl_bath_super_ohmic_new(double j0,
                                      double omega0,
                                      double z,
                                      double kbt,
                                      struct ClBath **out);

/**
 * Flat band `J = j0` on `[nu_min, nu_max]` (infinite ends allowed) with
 * constant occupation `n0`.
 *
 * # Safety
 * `out` must be a valid pointer; release with [`cl_bath_free`].
 */
enum ClStatus cl_bath_flat_new(double j0,
                               double nu_min,
                               double nu_max,
                               double n0,
                               struct ClBath **out);

/**
 * # Safety
 * `bath` must be null or a handle from a `cl_bath_*_new` call not yet freed.
 */
void cl_bath_free(struct ClBath *bath);

/**
 * Moments from vacuum at `n` times. `Exact` needs a uniform grid starting
 * at 0; the generators accept any nondecreasing times `>= 0`.
 *
 * # Safety
 * Handles must be live; `times` and `out` must each hold `n` elements.
 */
enum ClStatus cl_moments(const struct ClSystem *sys,
                         const struct ClBath *bath,
                         enum ClMethod method,
                         const double *times,
                         size_t n,
                         struct ClMoments *out);

/**
 * Long-time limit of the moments. Fails with `NO_STEADY_STATE` at
 * degeneracy.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum ClStatus cl_steady_state(const struct ClSystem *sys,
                              const struct ClBath *bath,
                              enum ClMethod method,
                              struct ClMoments *out);

/**
 * Four generator eigenvalues (decay rates are the real parts), as
 * interleaved `re, im` pairs in `out[8]`.
 *
 * # Safety
 * Handles must be live and `out` must hold 8 doubles.
 */
enum ClStatus cl_generator_eigenvalues(const struct ClSystem *sys,
                                       const struct ClBath *bath,
                                       enum ClMethod method,
                                       double *out);

/**
 * Poles of the exact propagator. Writes up to `capacity` poles and sets
 * `*count` to the number found; returns `BUFFER_TOO_SMALL` if they did
 * not fit.
 *
 * # Safety
 * Handles must be live, `out` must hold `capacity` elements and `count`
 * must be valid.
 */
enum ClStatus cl_find_poles(const struct ClSystem *sys,
                            const struct ClBath *bath,
                            struct ClPole *out,
                            size_t capacity,
                            size_t *count);

/**
 * Runs a CLI command (`"trajectory"`, `"validate"`, ...) on a config file.
 * `out_dir` may be null to use the configured directory. A failed
 * validation returns `VALIDATION_FAILED`.
 *
 * # Safety
 * `config_path` and `command` must be NUL-terminated strings; `out_dir`
 * must be null or one.
 */
enum ClStatus cl_run(const char *config_path, const char *command, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COHERENCE_LAB_H */
