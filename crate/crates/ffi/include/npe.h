/* C interface to the npe spectral simulation and control-synthesis
 * library. All objects are opaque handles owned by the library; every
 * function returns an npe_status and writes results through out
 * pointers. See npe_last_error_message() for failure details. */

#ifndef NPE_H
#define NPE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Verdict codes returned by [`npe_classify`].
 */
#define NPE_VERDICT_STABILITY 0

/**
 * The datum blows up in finite time.
 */
#define NPE_VERDICT_EXPLOSION 1

/**
 * The datum grows without a detected finite-time crossing.
 */
#define NPE_VERDICT_GROWING 2

/**
 * The datum sits inside the numerical tolerance band.
 */
#define NPE_VERDICT_UNDETERMINED 3

/**
 * Status codes shared with the `npe` CLI exit codes (0, 2..=7), plus
 * ABI-level failures in the 100 range.
 */
typedef enum NpeStatus {
  NPE_STATUS_OK = 0,
  NPE_STATUS_CONFIG = 2,
  NPE_STATUS_INVARIANT = 3,
  NPE_STATUS_CERTIFICATION = 4,
  NPE_STATUS_BLOW_UP = 5,
  NPE_STATUS_QUADRATURE = 6,
  NPE_STATUS_ENVELOPE = 7,
  NPE_STATUS_NULL_POINTER = 100,
  NPE_STATUS_INVALID_STRING = 101,
  NPE_STATUS_PANIC = 102,
} NpeStatus;

/**
 * A divergence-free vector field on the lattice (opaque).
 */
typedef struct NpeField NpeField;

/**
 * A synthesized stabilization plan together with its control and the
 * controlled datum (opaque).
 */
typedef struct NpePlan NpePlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *npe_last_error_message(void);

/**
 * Release a field handle. Passing NULL is a no-op.
 */
void npe_field_free(struct NpeField *field);

/**
 * Release a plan handle. Passing NULL is a no-op.
 */
void npe_plan_free(struct NpePlan *plan);

/**
 * Seeded random smooth divergence-free field with unit L2 norm on the
 * N^3 grid with spectral cutoff K (N even, N >= 3K + 1).
 */
enum NpeStatus npe_field_random(uintptr_t n,
                                uintptr_t k,
                                uint64_t seed,
                                double decay,
                                struct NpeField **out);

/**
 * The certified starting control u with |u|_0 = 1, supported on the
 * whole torus, with generator amplitudes (a0, a1, a2).
 */
enum NpeStatus npe_control_build(uintptr_t n,
                                 uintptr_t k,
                                 double a0,
                                 double a1,
                                 double a2,
                                 struct NpeField **out);

/**
 * Load a field from a file written by npe_field_write or the CLI.
 */
enum NpeStatus npe_field_read(const char *path, struct NpeField **out);

/**
 * Write a field to a file (atomically: temp file + rename).
 */
enum NpeStatus npe_field_write(const struct NpeField *field, const char *path);

/**
 * Lattice parameters of a field.
 */
enum NpeStatus npe_field_lattice(const struct NpeField *field, uintptr_t *n_out, uintptr_t *k_out);

/**
 * y = c * field, as a new handle.
 */
enum NpeStatus npe_field_scaled(const struct NpeField *field, double c, struct NpeField **out);

/**
 * L2 norm (with the (2 pi)^3 volume factor).
 */
enum NpeStatus npe_field_norm0(const struct NpeField *field, double *out);

/**
 * The cubic functional Psi.
 */
enum NpeStatus npe_psi(const struct NpeField *field, double *out);

/**
 * Phi = Psi / |.|_0^2.
 */
enum NpeStatus npe_phi(const struct NpeField *field, double *out);

/**
 * Total Phi-trace integral of the heat flow of the field over the
 * default quadrature horizon (for the unit control this is g_inf, whose
 * reciprocal is the blow-up threshold).
 */
enum NpeStatus npe_trace_integral(const struct NpeField *field, double *out);

/**
 * Sample |y(t)|_0 of the closed-form solution at `len` increasing times.
 *
 * On a finite-time blow-up the return status is BlowUp, the refined
 * blow-up time is written to `blowup_time_out` (NAN otherwise) and the
 * norms past the crossing are NAN.
 */
enum NpeStatus npe_simulate(const struct NpeField *field,
                            const double *times,
                            uintptr_t len,
                            double *norms_out,
                            double *blowup_time_out);

/**
 * Classify the datum; writes one of the NPE_VERDICT_* codes.
 */
enum NpeStatus npe_classify(const struct NpeField *field, double tolerance, int32_t *verdict_out);

/**
 * Synthesize a starting control for the datum: certify the control,
 * estimate the constants and select lambda. The plan owns both the
 * control u and the stabilized datum v = y0 - lambda u.
 */
enum NpeStatus npe_synthesize(const struct NpeField *y0, struct NpePlan **out);

/**
 * Selected control amplitude lambda (0 for already-stable data).
 */
enum NpeStatus npe_plan_lambda(const struct NpePlan *plan, double *out);

/**
 * Certified decay constant beta-hat of the control.
 */
enum NpeStatus npe_plan_beta_hat(const struct NpePlan *plan, double *out);

/**
 * Stabilization horizon T; |y(T)|_0 is inside the small ball.
 */
enum NpeStatus npe_plan_horizon(const struct NpePlan *plan, double *out);

/**
 * Small-ball radius r0 = 1 / (2 c1).
 */
enum NpeStatus npe_plan_small_ball_radius(const struct NpePlan *plan, double *out);

/**
 * Copy of the certified unit-norm control u.
 */
enum NpeStatus npe_plan_control(const struct NpePlan *plan, struct NpeField **out);

/**
 * Copy of the stabilized datum v = y0 - lambda u.
 */
enum NpeStatus npe_plan_stabilized_datum(const struct NpePlan *plan, struct NpeField **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* NPE_H */
