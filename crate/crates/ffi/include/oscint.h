#ifndef OSCINT_H
#define OSCINT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define OSCINT_SYSTEM_FPU 0

#define OSCINT_SYSTEM_QUARTIC3 1

#define OSCINT_SYSTEM_QUARTIC4 2

#define OSCINT_SYSTEM_PENDULUM 3

#define OSCINT_INTEGRATOR_HJ 0

#define OSCINT_INTEGRATOR_HJ_NOLOOP 1

#define OSCINT_INTEGRATOR_HJ_SYMMETRIC 2

#define OSCINT_INTEGRATOR_VERLET 3

#define OSCINT_INTEGRATOR_IMPULSE 4

#define OSCINT_INTEGRATOR_MOLLIFY 5

typedef enum OscintStatus {
  OSCINT_STATUS_OK = 0,
  OSCINT_STATUS_NULL_POINTER = 1,
  OSCINT_STATUS_INVALID_ARGUMENT = 2,
  OSCINT_STATUS_BUFFER_TOO_SMALL = 3,
  OSCINT_STATUS_NO_CONVERGENCE = 4,
  OSCINT_STATUS_NON_FINITE = 5,
  OSCINT_STATUS_FREQUENCY_FLOOR = 6,
  OSCINT_STATUS_DOMAIN = 7,
  OSCINT_STATUS_IO = 8,
  OSCINT_STATUS_PANIC = 9,
} OscintStatus;

/**
 * Opaque integrator handle.
 */
typedef struct OscintIntegrator OscintIntegrator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an integrator at the system's default initial condition.
 *
 * # Safety
 * `out` must point to writable storage for one handle pointer.
 */
enum OscintStatus oscint_integrator_new(uint32_t system,
                                        uint32_t integrator,
                                        double eps,
                                        double h,
                                        struct OscintIntegrator **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `ptr` must come from `oscint_integrator_new` and not be used afterwards.
 */
void oscint_integrator_free(struct OscintIntegrator *ptr);

/**
 * Sets the inner step of the Impulse and Mollify baselines.
 *
 * # Safety
 * `ptr` must be a live handle.
 */
enum OscintStatus oscint_integrator_set_inner_dt(struct OscintIntegrator *ptr, double inner_dt);

/**
 * Number of doubles in a state vector.
 *
 * # Safety
 * `ptr` must be a live handle and `out` writable.
 */
enum OscintStatus oscint_integrator_dim(const struct OscintIntegrator *ptr, uintptr_t *out);

/**
 * Copies the state, `(q1, q2, p1, p2)` or `(a, r, p_a, p_r)`, into `buf`.
 *
 * # Safety
 * `ptr` must be a live handle and `buf` valid for `len` doubles.
 */
enum OscintStatus oscint_integrator_get_state(const struct OscintIntegrator *ptr,
                                              double *buf,
                                              uintptr_t len);

/**
 * Replaces the state.
 *
 * # Safety
 * `ptr` must be a live handle and `buf` valid for `len` doubles.
 */
enum OscintStatus oscint_integrator_set_state(struct OscintIntegrator *ptr,
                                              const double *buf,
                                              uintptr_t len);

/**
 * Advances `n` steps; on failure the state is left at the last good step.
 *
 * # Safety
 * `ptr` must be a live handle.
 */
enum OscintStatus oscint_integrator_step(struct OscintIntegrator *ptr, uint64_t n);

/**
 * Number of observables written by `oscint_integrator_observables`.
 *
 * # Safety
 * `ptr` must be a live handle and `out` writable.
 */
enum OscintStatus oscint_integrator_observable_count(const struct OscintIntegrator *ptr,
                                                     uintptr_t *out);

/**
 * Energy, invariants and actions, in the CLI drift column order.
 *
 * # Safety
 * `ptr` must be a live handle and `buf` valid for `len` doubles.
 */
enum OscintStatus oscint_integrator_observables(const struct OscintIntegrator *ptr,
                                                double *buf,
                                                uintptr_t len);

/**
 * # Safety
 * `ptr` must be a live handle and `out` writable.
 */
enum OscintStatus oscint_integrator_time(const struct OscintIntegrator *ptr, double *out);

/**
 * Slow-force evaluations so far.
 *
 * # Safety
 * `ptr` must be a live handle and `out` writable.
 */
enum OscintStatus oscint_integrator_slow_gradient_calls(const struct OscintIntegrator *ptr,
                                                        uint64_t *out);

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `len` bytes. Returns the full message length without the
 * terminator, so a too-small buffer can be retried.
 *
 * # Safety
 * `buf` must be valid for `len` bytes, or null with `len == 0`.
 */
uintptr_t oscint_last_error_message(char *buf, uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OSCINT_H */
