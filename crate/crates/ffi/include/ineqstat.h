#ifndef INEQSTAT_H
#define INEQSTAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum IneqStatus {
  INEQ_STATUS_OK = 0,
  INEQ_STATUS_NULL_POINTER = 1,
  INEQ_STATUS_DOMAIN = 2,
  INEQ_STATUS_RANGE = 3,
  INEQ_STATUS_CONFIG = 4,
  INEQ_STATUS_NO_INTERSECTION = 5,
  INEQ_STATUS_NON_PHYSICAL = 6,
  INEQ_STATUS_INSUFFICIENT_DATA = 7,
  INEQ_STATUS_SINGULAR_DIFFUSION = 8,
  INEQ_STATUS_FORMAT = 9,
  INEQ_STATUS_EMPTY_JOIN = 10,
  INEQ_STATUS_DEGENERATE = 11,
  INEQ_STATUS_IO = 12,
  INEQ_STATUS_PANIC = 13,
} IneqStatus;

/**
 * Exchange rule selector for [`ineq_engine_new`].
 */
typedef enum IneqRule {
  INEQ_RULE_FIXED = 0,
  INEQ_RULE_UNIFORM = 1,
} IneqRule;

/**
 * Money-exchange simulation state.
 */
typedef struct IneqEngine IneqEngine;

/**
 * Two-class income density.
 */
typedef struct IneqModel IneqModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next
 * failing call on the same thread; empty if none failed.
 */
const char *ineq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ineq_version(void);

enum IneqStatus ineq_model_new(double t, double alpha, double r0, struct IneqModel **model);

/**
 * Releases a model; null is ignored.
 */
void ineq_model_free(struct IneqModel *model);

enum IneqStatus ineq_model_pdf(const struct IneqModel *model, double r, double *value);

/**
 * Complementary CDF `P(income >= r)`.
 */
enum IneqStatus ineq_model_ccdf(const struct IneqModel *model, double r, double *value);

enum IneqStatus ineq_model_mean(const struct IneqModel *model, double *value);

/**
 * Income `r` with `P(income >= r) = p`.
 */
enum IneqStatus ineq_model_inverse_ccdf(const struct IneqModel *model, double p, double *value);

enum IneqStatus ineq_lorenz_exponential(double x, double *y);

enum IneqStatus ineq_lorenz_two_class(double x, double f, double *y);

/**
 * Boundary between the exponential fit `c1 e^{-r/T}` and the power-law fit
 * `c2 r^{-alpha}`, and the population share above it.
 */
enum IneqStatus ineq_class_boundary(double t,
                                    double alpha,
                                    double c1,
                                    double c2,
                                    double *r_star,
                                    double *upper_fraction);

/**
 * Engine with `n_agents` agents sharing `total_quanta` equally. `floor`
 * is the lowest allowed balance (0, or negative for debt).
 */
enum IneqStatus ineq_engine_new(size_t n_agents,
                                int64_t total_quanta,
                                enum IneqRule rule,
                                int64_t delta,
                                int64_t floor,
                                uint64_t seed,
                                struct IneqEngine **engine);

/**
 * Releases an engine; null is ignored.
 */
void ineq_engine_free(struct IneqEngine *engine);

enum IneqStatus ineq_engine_run(struct IneqEngine *engine, uint64_t steps);

/**
 * Entropy of the balance histogram with one-quantum bins.
 */
enum IneqStatus ineq_engine_entropy(const struct IneqEngine *engine, double *value);

/**
 * Temperature and chemical potential in quanta.
 */
enum IneqStatus ineq_engine_thermo(const struct IneqEngine *engine,
                                   double *temperature,
                                   double *potential);

/**
 * Recomputed integer sum of all balances.
 */
enum IneqStatus ineq_engine_balance_sum(const struct IneqEngine *engine, int64_t *sum);

/**
 * Copies up to `capacity` balances into `buffer` and stores the number of
 * agents in `n_agents`. Pass a null buffer to query the count only.
 */
enum IneqStatus ineq_engine_balances(const struct IneqEngine *engine,
                                     int64_t *buffer,
                                     size_t capacity,
                                     size_t *n_agents);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INEQSTAT_H */
