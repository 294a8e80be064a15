#ifndef FRACINT_H
#define FRACINT_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum FracStatus {
  FRAC_STATUS_OK = 0,
  FRAC_STATUS_NULL_POINTER = 1,
  FRAC_STATUS_NON_POSITIVE_ORDER = 2,
  FRAC_STATUS_INTEGER_ORDER = 3,
  FRAC_STATUS_POLE = 4,
  FRAC_STATUS_RANGE = 5,
  FRAC_STATUS_DOMAIN = 6,
  FRAC_STATUS_TOLERANCE_NOT_MET = 7,
  FRAC_STATUS_CONVERGENCE = 8,
  FRAC_STATUS_UNSUPPORTED_TRANSFORM = 9,
  FRAC_STATUS_ORDER_OUT_OF_RANGE = 10,
  FRAC_STATUS_INVALID_ARGUMENT = 11,
  FRAC_STATUS_BUFFER_TOO_SMALL = 12,
  FRAC_STATUS_PANIC = 13,
} FracStatus;

/**
 * Builtin transform families.
 */
typedef enum FracTransformKind {
  /**
   * `psi = exp(w)` on the real line.
   */
  FRAC_TRANSFORM_KIND_EXP = 0,
  /**
   * `psi = w^2` on `(0, inf)`.
   */
  FRAC_TRANSFORM_KIND_SQUARE = 1,
  /**
   * `psi = w^(1 - alpha)` on `(0, inf)`, with alpha taken from the order.
   */
  FRAC_TRANSFORM_KIND_POWER = 2,
  /**
   * `psi = tan(pi w / 2)` on `(0, 1)`.
   */
  FRAC_TRANSFORM_KIND_TAN = 3,
  /**
   * `psi = w^sigma / (1 - w)^rho` on `(0, 1)`.
   */
  FRAC_TRANSFORM_KIND_RATIONAL = 4,
} FracTransformKind;

/**
 * Time-stepping schemes.
 */
typedef enum FracStepper {
  FRAC_STEPPER_BACKWARD_EULER = 0,
  /**
   * Trapezoidal rule with a damped first step.
   */
  FRAC_STEPPER_TRAPEZOIDAL = 1,
  FRAC_STEPPER_TRAPEZOIDAL_UNDAMPED = 2,
} FracStepper;

/**
 * Quadrature rule handle.
 */
typedef struct FracRule FracRule;

/**
 * Diffusive state handle.
 */
typedef struct FracState FracState;

/**
 * Transform descriptor. `sigma` and `rho` are read only for `Rational`.
 */
typedef struct FracTransform {
  enum FracTransformKind kind;
  double sigma;
  double rho;
} FracTransform;

/**
 * `f(t, user_data)`.
 */
typedef double (*FracSourceFn)(double t, void *user_data);

/**
 * Source function: a builtin `tag` if non-null, else `callback`.
 */
typedef struct FracSource {
  const char *tag;
  FracSourceFn callback;
  void *user_data;
} FracSource;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`) and returns the full length
 * including the terminator. An empty message means the last call succeeded.
 */
size_t frac_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *frac_version(void);

/**
 * `n = ceil(alpha)` and the constant `c_alpha` of the diffusive kernel.
 */
enum FracStatus frac_order_constants(double alpha, uint32_t *n_out, double *c_alpha_out);

enum FracStatus frac_gamma(double x, double *out);

/**
 * `sum_k (-1)^k C(n, k) k^mu`, which is zero for `mu < n`.
 */
enum FracStatus frac_binom_alternating_sum(uint32_t n, uint32_t mu, int64_t *out);

/**
 * Fractional integral of `(t - a)^beta` in closed form.
 */
enum FracStatus frac_rl_power_closed_form(double alpha,
                                          double beta,
                                          double a,
                                          double t,
                                          double *out);

enum FracStatus frac_psi(double alpha,
                         const struct FracTransform *transform_desc,
                         double omega,
                         double *out);

/**
 * Builds the diffusive quadrature rule for times up to `horizon` after the
 * start. `alpha` must lie in `(0, 1)`.
 */
enum FracStatus frac_rule_build(double alpha,
                                const struct FracTransform *transform_desc,
                                size_t m_half,
                                double horizon,
                                struct FracRule **out);

/**
 * Number of nodes, or 0 for a null handle.
 */
size_t frac_rule_len(const struct FracRule *rule);

enum FracStatus frac_rule_nodes(const struct FracRule *rule, double *out, size_t capacity);

enum FracStatus frac_rule_weights(const struct FracRule *rule, double *out, size_t capacity);

void frac_rule_free(struct FracRule *rule);

/**
 * Zero state at time `a`. The state keeps its own reference to the rule,
 * so the rule handle may be freed afterwards.
 */
enum FracStatus frac_state_new(double alpha,
                               const struct FracTransform *transform_desc,
                               const struct FracRule *rule,
                               double a,
                               struct FracState **out);

enum FracStatus frac_state_step_backward_euler(struct FracState *state, double h, double f_next);

enum FracStatus frac_state_step_trapezoidal(struct FracState *state,
                                            double h,
                                            double f_cur,
                                            double f_next);

/**
 * Current approximation of the fractional integral.
 */
enum FracStatus frac_state_read(const struct FracState *state, double *out);

enum FracStatus frac_state_time(const struct FracState *state, double *out);

void frac_state_free(struct FracState *state);

/**
 * Evaluates the fractional integral at the `len` increasing points
 * `points[0..len]` (all `>= a`) and writes `len` values to `out`.
 */
enum FracStatus frac_evaluate_grid(double alpha,
                                   const struct FracTransform *transform_desc,
                                   const struct FracSource *src,
                                   double a,
                                   const double *points,
                                   size_t len,
                                   size_t m_half,
                                   enum FracStepper scheme,
                                   double *out);

/**
 * Reference value by adaptive quadrature of the defining integral.
 */
enum FracStatus frac_rl_direct(double alpha,
                               const struct FracSource *src,
                               double a,
                               double t,
                               double tol,
                               double *out);

/**
 * Diffusive kernel `phi(t, omega)` by adaptive quadrature.
 */
enum FracStatus frac_phi_direct(double alpha,
                                const struct FracTransform *transform_desc,
                                const struct FracSource *src,
                                double a,
                                double t,
                                double omega,
                                double tol,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACINT_H */
