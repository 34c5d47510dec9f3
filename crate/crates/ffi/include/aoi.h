#ifndef AOI_H
#define AOI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum AoiStatus {
  AOI_STATUS_OK = 0,
  AOI_STATUS_NULL_POINTER = 1,
  AOI_STATUS_INVALID_ARGUMENT = 2,
  AOI_STATUS_NON_CONVERGENT = 3,
  /**
   * The requested mean is infinite; the out value is set to +inf.
   */
  AOI_STATUS_DIVERGENT = 4,
  AOI_STATUS_EMPTY_TOPOLOGY = 5,
  AOI_STATUS_IO = 6,
  AOI_STATUS_INTERNAL = 7,
  AOI_STATUS_PANIC = 8,
} AoiStatus;

/**
 * A solved meta distribution.
 */
typedef struct AoiMetaDist AoiMetaDist;

/**
 * A bipolar topology on a torus.
 */
typedef struct AoiTopology AoiTopology;

/**
 * Model parameters in linear units.
 */
typedef struct AoiParams {
  /**
   * Transmitter density per square meter.
   */
  double lambda;
  /**
   * Link distance in meters.
   */
  double r;
  /**
   * Path-loss exponent, above 2.
   */
  double alpha;
  /**
   * SINR threshold.
   */
  double theta;
  /**
   * Channel access probability.
   */
  double p;
  /**
   * Packet arrival probability per slot.
   */
  double xi;
  /**
   * Transmit power in milliwatts.
   */
  double ptx;
  /**
   * Noise power in milliwatts; zero disables noise.
   */
  double sigma2;
} AoiParams;

/**
 * Network-level simulation results.
 */
typedef struct AoiSimSummary {
  double avg_aoi;
  double peak_aoi_mean;
  double mean_success;
  double mean_busy;
  uint64_t links;
  uint64_t censored_links;
} AoiSimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *aoi_version(void);

/**
 * Default parameters: λ = 0.01, r = 0.5, α = 3.8, θ = 1, p = 1, ξ = 0.5,
 * 17 dBm transmit power and -90 dBm noise.
 */
struct AoiParams aoi_params_default(void);

/**
 * Copies the message of the last failure on this thread into `buf`
 * (NUL-terminated, truncated to `len`) and returns the full message length.
 */
size_t aoi_last_error_message(char *buf, size_t len);

/**
 * Solves the Beta-approximated meta distribution.
 */
enum AoiStatus aoi_meta_solve_beta(const struct AoiParams *params,
                                   double tol,
                                   uint32_t max_iter,
                                   struct AoiMetaDist **out);

/**
 * Solves the full meta distribution by characteristic-function inversion,
 * starting from `start`.
 */
enum AoiStatus aoi_meta_solve_exact(const struct AoiParams *params,
                                    const struct AoiMetaDist *start,
                                    struct AoiMetaDist **out);

void aoi_meta_free(struct AoiMetaDist *dist);

/**
 * CDF of the success probability at `u`.
 */
enum AoiStatus aoi_meta_cdf(const struct AoiMetaDist *dist, double u, double *out);

/**
 * Shapes of a Beta law; fails with `InvalidArgument` for other laws.
 */
enum AoiStatus aoi_meta_beta_shapes(const struct AoiMetaDist *dist, double *a, double *b);

/**
 * Network average age of information; `Divergent` with `+inf` when the
 * mean does not exist.
 */
enum AoiStatus aoi_network_avg_aoi(const struct AoiMetaDist *dist,
                                   double xi,
                                   double p,
                                   double *out);

/**
 * Fraction of links whose mean peak age exceeds `a_threshold`.
 */
enum AoiStatus aoi_peak_outage(const struct AoiMetaDist *dist,
                               double a_threshold,
                               double xi,
                               double p,
                               double *out);

/**
 * Samples a Poisson bipolar network on a torus of side `side` meters.
 */
enum AoiStatus aoi_topology_sample(const struct AoiParams *params,
                                   double side,
                                   uint64_t seed,
                                   struct AoiTopology **out);

/**
 * Loads a topology CSV (`id, tx_x, tx_y, rx_x, rx_y`).
 */
enum AoiStatus aoi_topology_read_csv(const char *path, double side, struct AoiTopology **out);

enum AoiStatus aoi_topology_write_csv(const struct AoiTopology *topo, const char *path);

enum AoiStatus aoi_topology_len(const struct AoiTopology *topo, size_t *out);

void aoi_topology_free(struct AoiTopology *topo);

/**
 * Simulates `slots` slots (the first tenth discarded) with every node using
 * access probability `params.p`.
 */
enum AoiStatus aoi_simulate(const struct AoiTopology *topo,
                            const struct AoiParams *params,
                            uint64_t slots,
                            uint64_t seed,
                            struct AoiSimSummary *out);

/**
 * Simulates under the locally adaptive access policy with frames of
 * `frame_len` slots and observation radius `window_radius`.
 */
enum AoiStatus aoi_simulate_adaptive(const struct AoiTopology *topo,
                                     const struct AoiParams *params,
                                     uint64_t slots,
                                     uint64_t seed,
                                     uint64_t frame_len,
                                     double window_radius,
                                     struct AoiSimSummary *out);

/**
 * Access probability from `n` neighbor terms `(d[j], a[j])` and a tail
 * term. `d` and `a` may be null when `n` is zero.
 */
enum AoiStatus aoi_solve_eta(const double *d, const double *a, size_t n, double tail, double *out);

/**
 * Simulates a single queue with per-slot success probability `s`.
 */
enum AoiStatus aoi_queue_oracle(double xi,
                                double s,
                                uint64_t slots,
                                uint64_t seed,
                                double *avg_aoi,
                                double *peak_aoi,
                                double *busy_fraction);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AOI_H */
