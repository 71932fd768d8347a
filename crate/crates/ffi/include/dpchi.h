/* C interface for the dpchi library: differentially private chi-square
 * hypothesis tests on histogram data.
 *
 * Every test writes its result into a dpchi_report and returns one of
 * the DPCHI_* error codes (DPCHI_OK on success). Randomness comes from
 * an opaque deterministic stream created with dpchi_rng_new; the same
 * (master_seed, stream_id) pair always reproduces the same results.
 *
 * Maintained by hand; ffi/src/lib.rs is the source of truth and a unit
 * test checks that every exported symbol appears here.
 */

#ifndef DPCHI_H
#define DPCHI_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Error codes. */
#define DPCHI_OK 0
#define DPCHI_ERR_DOMAIN 1
#define DPCHI_ERR_SHAPE 2
#define DPCHI_ERR_INVALID_NULL 3
#define DPCHI_ERR_INSUFFICIENT_SAMPLES 4
#define DPCHI_ERR_DEGENERATE_TABLE 5
#define DPCHI_ERR_DATA 6
#define DPCHI_ERR_CONFIG 7
#define DPCHI_ERR_IO 8
#define DPCHI_ERR_NULL_POINTER 9

/* Decisions. */
#define DPCHI_DECISION_FAIL_TO_REJECT 0
#define DPCHI_DECISION_REJECT 1
#define DPCHI_DECISION_INCONCLUSIVE 2

/* Result of a single hypothesis test. */
typedef struct dpchi_report {
  /* One of the DPCHI_DECISION_* constants. */
  int32_t decision;
  double statistic;
  double threshold;
  uint32_t df;
  /* Monte-Carlo replicates used, or -1 for asymptotic tests. */
  int64_t mc_samples;
  /* 0 when a numerical minimization stopped on its evaluation budget. */
  int32_t minimizer_converged;
} dpchi_report;

/* Opaque deterministic RNG stream. */
typedef struct dpchi_rng dpchi_rng;

/* Create an RNG stream; never fails. Free with dpchi_rng_free. */
dpchi_rng *dpchi_rng_new(uint64_t master_seed, uint64_t stream_id);

/* Free an RNG stream; NULL is a no-op. */
void dpchi_rng_free(dpchi_rng *rng);

/* Static, NUL-terminated name for an error code; never NULL. */
const char *dpchi_error_name(int32_t code);

/* Pure-DP to zCDP conversion: *out_rho = epsilon^2 / 2. */
int32_t dpchi_zcdp_of_pure(double epsilon, double *out_rho);

/* Asymptotic goodness-of-fit test under rho-zCDP (Gaussian noise).
 * counts and null_probs hold d elements; projected selects the
 * projected statistic (nonzero) or the unprojected one (0). */
int32_t dpchi_gof_test(const uint64_t *counts, size_t d,
                       const double *null_probs, double rho, double alpha,
                       int32_t projected, dpchi_rng *rng, dpchi_report *out);

/* Monte-Carlo goodness-of-fit test under epsilon-DP (Laplace noise,
 * per-cell variance 8/epsilon^2) with m null replicates. Pass a
 * positive noise_variance to override the default, or 0 to use it. */
int32_t dpchi_mc_gof_test(const uint64_t *counts, size_t d,
                          const double *null_probs, double epsilon,
                          double alpha, int32_t projected, size_t m,
                          double noise_variance, dpchi_rng *rng,
                          dpchi_report *out);

/* Asymptotic independence test under rho-zCDP on a row-major
 * rows x cols table of counts. The decision can be
 * DPCHI_DECISION_INCONCLUSIVE when expected cell counts are too small
 * for the asymptotics. */
int32_t dpchi_indep_test(const uint64_t *counts, size_t rows, size_t cols,
                         double rho, double alpha, int32_t projected,
                         dpchi_rng *rng, dpchi_report *out);

/* GWAS output-perturbation test under rho-zCDP on a row-major 3x2
 * case/control table whose two column sums are both n/2. */
int32_t dpchi_gwas_output_perturbation_test(const uint64_t *counts,
                                            double rho, double alpha,
                                            dpchi_rng *rng,
                                            dpchi_report *out);

#ifdef __cplusplus
}
#endif

#endif /* DPCHI_H */
