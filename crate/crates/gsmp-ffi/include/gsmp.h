#ifndef GSMP_H
#define GSMP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GsmpStatus {
  GSMP_STATUS_OK = 0,
  GSMP_STATUS_NULL_POINTER = 1,
  GSMP_STATUS_INVALID_ARGUMENT = 2,
  GSMP_STATUS_DIMENSION = 3,
  GSMP_STATUS_AT_POLE = 4,
  GSMP_STATUS_NO_CONVERGENCE = 5,
  GSMP_STATUS_INFEASIBLE = 6,
  GSMP_STATUS_OUT_OF_WINDOW = 7,
  GSMP_STATUS_MARGIN = 8,
  GSMP_STATUS_SINGULAR = 9,
  GSMP_STATUS_BREAKDOWN = 10,
  GSMP_STATUS_DISCREPANCY = 11,
  GSMP_STATUS_ROOT_COUNT = 12,
  GSMP_STATUS_IO = 13,
  GSMP_STATUS_BUFFER_TOO_SMALL = 14,
  GSMP_STATUS_PANIC = 15,
} GsmpStatus;

/**
 * How each flow step is computed.
 */
typedef enum GsmpFlowMode {
  GSMP_FLOW_MODE_FAST = 0,
  GSMP_FLOW_MODE_REFERENCE = 1,
  /**
   * Both paths, compared against `dual_tol`.
   */
  GSMP_FLOW_MODE_DUAL = 2,
} GsmpFlowMode;

/**
 * Iterates of a flow run.
 */
typedef struct GsmpFlowTrace GsmpFlowTrace;

/**
 * Rational potential of a finite-gap set.
 */
typedef struct GsmpPotential GsmpPotential;

/**
 * Certified points of an isospectral torus.
 */
typedef struct GsmpTorus GsmpTorus;

/**
 * Finite window of block coefficients.
 */
typedef struct GsmpWindow GsmpWindow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *gsmp_version(void);

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *gsmp_last_error_message(void);

/**
 * Solves for the potential of the bands `[edges[0], edges[1]], [edges[2], edges[3]], ...`.
 */
enum GsmpStatus gsmp_potential_solve(const double *edges,
                                     size_t n_edges,
                                     double tol,
                                     size_t max_iter,
                                     struct GsmpPotential **out);

void gsmp_potential_free(struct GsmpPotential *p);

enum GsmpStatus gsmp_potential_genus(const struct GsmpPotential *p, size_t *genus);

/**
 * `lambda0`, `c0` and the `g` pairs `(lambda_k, c_k)` in increasing `c_k`.
 */
enum GsmpStatus gsmp_potential_params(const struct GsmpPotential *p,
                                      double *lambda0,
                                      double *c0,
                                      double *residues,
                                      double *poles,
                                      size_t cap);

/**
 * `V(re + i im)`.
 */
enum GsmpStatus gsmp_potential_eval(const struct GsmpPotential *p,
                                    double re,
                                    double im,
                                    double *out_re,
                                    double *out_im);

/**
 * Samples `count` certified torus points (the `q = 0` point first).
 */
enum GsmpStatus gsmp_torus_sample(const struct GsmpPotential *p,
                                  size_t count,
                                  uint64_t seed,
                                  double tol,
                                  struct GsmpTorus **out);

void gsmp_torus_free(struct GsmpTorus *t);

enum GsmpStatus gsmp_torus_len(const struct GsmpTorus *t, size_t *len);

/**
 * Coefficients `p`, `q` (each of length `g + 1`) of point `index`.
 */
enum GsmpStatus gsmp_torus_point(const struct GsmpTorus *t,
                                 size_t index,
                                 double *p,
                                 double *q,
                                 size_t cap);

/**
 * Window with `n_blocks` blocks starting at `lo`; `p` and `q` hold
 * `n_blocks * (genus + 1)` values, block by block.
 */
enum GsmpStatus gsmp_window_new(const double *poles,
                                size_t genus,
                                int64_t lo,
                                const double *p,
                                const double *q,
                                size_t n_blocks,
                                struct GsmpWindow **out);

/**
 * Constant window of the point `(p, q)` on blocks `[-half_width, half_width)`.
 */
enum GsmpStatus gsmp_window_periodic(const struct GsmpPotential *pot,
                                     const double *p,
                                     const double *q,
                                     size_t half_width,
                                     struct GsmpWindow **out);

/**
 * Adds `amplitude * j^-exponent * U[-1, 1]` to every coefficient of blocks
 * `j >= 1`; fails unless the result is certified.
 */
enum GsmpStatus gsmp_window_perturb(const struct GsmpWindow *w,
                                    double exponent,
                                    double amplitude,
                                    uint64_t seed,
                                    struct GsmpWindow **out);

void gsmp_window_free(struct GsmpWindow *w);

/**
 * Genus and stored block range `[lo, hi)`.
 */
enum GsmpStatus gsmp_window_shape(const struct GsmpWindow *w,
                                  size_t *genus,
                                  int64_t *lo,
                                  int64_t *hi);

enum GsmpStatus gsmp_window_block(const struct GsmpWindow *w,
                                  int64_t j,
                                  double *p,
                                  double *q,
                                  size_t cap);

/**
 * Class check at the default margin: `certified` and the smallest of
 * `Lambda#` and `p_g` over the window.
 */
enum GsmpStatus gsmp_window_check_class(const struct GsmpWindow *w,
                                        bool *certified,
                                        double *margin);

/**
 * Runs `steps` flow steps. A run that stops early still succeeds; see
 * [`gsmp_flow_stop`].
 */
enum GsmpStatus gsmp_flow_run(const struct GsmpWindow *w,
                              size_t steps,
                              enum GsmpFlowMode mode,
                              double dual_tol,
                              struct GsmpFlowTrace **out);

void gsmp_flow_free(struct GsmpFlowTrace *t);

/**
 * Completed steps, and whether (and at which step) the run stopped early.
 */
enum GsmpStatus gsmp_flow_stop(const struct GsmpFlowTrace *t,
                               size_t *steps,
                               bool *stopped,
                               size_t *stop_step);

/**
 * Extracted Jacobi coefficients `a(n)`, `b(n)` for `n = 0 .. steps - 1`.
 */
enum GsmpStatus gsmp_flow_jacobi(const struct GsmpFlowTrace *t,
                                 double *a,
                                 double *b,
                                 size_t cap,
                                 size_t *len);

/**
 * `delta_J H_+` of the window for the potential.
 */
enum GsmpStatus gsmp_ks_delta(const struct GsmpWindow *w,
                              const struct GsmpPotential *pot,
                              double *out);

/**
 * Runs the acceptance checks; `passed` receives the number that passed.
 */
enum GsmpStatus gsmp_verify(uint32_t *passed, uint32_t *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GSMP_H */
