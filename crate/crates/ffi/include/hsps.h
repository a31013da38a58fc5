#ifndef HSPS_H
#define HSPS_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define HSPS_FLAG_APPROXIMATION_STRETCHED (1 << 0)

#define HSPS_FLAG_ROUNDED_EFFICIENCIES (1 << 1)

#define HSPS_FLAG_OVERLAPPING_GATES (1 << 2)

#define HSPS_FLAG_LOW_STATISTICS (1 << 3)

#define HSPS_FLAG_CLAMPED_P1 (1 << 4)

#define HSPS_FLAG_CLAMPED_P2 (1 << 5)

#define HSPS_FLAG_NOISE_MODEL_INCONSISTENT (1 << 6)

#define HSPS_FLAG_P2_ONE_SIDED (1 << 7)

#define HSPS_FLAG_G2_UNDEFINED (1 << 8)

/**
 * Result code of every call.
 */
typedef enum HspsStatus {
  HSPS_STATUS_OK = 0,
  HSPS_STATUS_NULL_POINTER = 1,
  HSPS_STATUS_INVALID_ARGUMENT = 2,
  HSPS_STATUS_DOMAIN = 3,
  HSPS_STATUS_INCONSISTENT = 4,
  HSPS_STATUS_UNKNOWN_SCENARIO = 5,
  HSPS_STATUS_CONFIG = 6,
  HSPS_STATUS_PARSE = 7,
  HSPS_STATUS_IO = 8,
  HSPS_STATUS_MERGE = 9,
  HSPS_STATUS_PANIC = 10,
} HspsStatus;

/**
 * Parameters reachable through [`hsps_config_get`] and [`hsps_config_set`].
 */
typedef enum HspsParam {
  HSPS_PARAM_MU = 0,
  HSPS_PARAM_DELTA_T = 1,
  HSPS_PARAM_GAMMA = 2,
  HSPS_PARAM_IDLER_LOSS_DB = 3,
  HSPS_PARAM_ETA_TRIGGER = 4,
  HSPS_PARAM_TRIGGER_TRANSMISSION = 5,
  HSPS_PARAM_DARK_RATE_TRIGGER = 6,
  HSPS_PARAM_ETA_IDLER = 7,
  HSPS_PARAM_DARK_RATE_IDLER = 8,
  HSPS_PARAM_SPLITTER_T = 9,
  HSPS_PARAM_COHERENCE_TIME = 10,
  HSPS_PARAM_ETA_REL_SIGMA = 11,
} HspsParam;

/**
 * Opaque configuration handle.
 */
typedef struct HspsConfig HspsConfig;

/**
 * Figures of merit. Absent uncertainties are NaN; `flags` is a bitmask of
 * `HSPS_FLAG_*` values.
 */
typedef struct HspsFigures {
  double p1;
  double p2;
  double g2;
  double sigma_p1;
  double sigma_p2;
  double sigma_g2;
  uint32_t flags;
} HspsFigures;

/**
 * Relative one-sigma uncertainties of the source parameters.
 */
typedef struct HspsRelativeSigmas {
  double mu;
  double delta_t;
  double gamma;
  double eta_trigger;
  double trigger_transmission;
  double dark_rate_trigger;
} HspsRelativeSigmas;

/**
 * Raw detector counts of one acquisition.
 */
typedef struct HspsRawCounts {
  uint64_t heralds;
  uint64_t singles;
  uint64_t coincidences;
  uint64_t gates_opened;
  uint64_t gates_with_detection;
  /**
   * Acquisition time (s).
   */
  double duration;
} HspsRawCounts;

/**
 * Photon-number distribution in heralded gates.
 */
typedef struct HspsWindowDistribution {
  double p0;
  double p1;
  double p2plus;
} HspsWindowDistribution;

/**
 * Creates a configuration from a catalog scenario name.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum HspsStatus hsps_config_from_scenario(const char *name, struct HspsConfig **out);

/**
 * Creates a configuration from TOML text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum HspsStatus hsps_config_from_toml(const char *text, struct HspsConfig **out);

/**
 * Releases a configuration. Null is ignored.
 *
 * # Safety
 * `config` must come from this library and not be used afterwards.
 */
void hsps_config_free(struct HspsConfig *config);

/**
 * Reads one parameter.
 *
 * # Safety
 * `config` must be a live handle; `value` must be writable.
 */
enum HspsStatus hsps_config_get(const struct HspsConfig *config,
                                enum HspsParam param,
                                double *value);

/**
 * Sets one parameter. The new set is validated; on error the handle is
 * left unchanged. Setting `Gamma` drops any stored preparation efficiency.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum HspsStatus hsps_config_set(struct HspsConfig *config, enum HspsParam param, double value);

/**
 * Closed-form figures of merit.
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
enum HspsStatus hsps_figures_of_merit(const struct HspsConfig *config, struct HspsFigures *out);

/**
 * Closed-form figures with bootstrap uncertainties from relative parameter
 * uncertainties.
 *
 * # Safety
 * `config` and `sigmas` must be valid; `out` must be writable.
 */
enum HspsStatus hsps_propagate_uncertainty(const struct HspsConfig *config,
                                           const struct HspsRelativeSigmas *sigmas,
                                           size_t n_resamples,
                                           uint64_t seed,
                                           struct HspsFigures *out);

/**
 * Runs the Monte Carlo bench with the configuration's engine and dead time.
 * `window` may be null.
 *
 * # Safety
 * `config` must be a live handle; `counts` and a non-null `window` must be
 * writable.
 */
enum HspsStatus hsps_simulate(const struct HspsConfig *config,
                              double duration,
                              uint64_t seed,
                              uint32_t replicas,
                              struct HspsRawCounts *counts,
                              struct HspsWindowDistribution *window);

/**
 * Point estimate of the figures of merit from raw counts.
 *
 * # Safety
 * `config` and `counts` must be valid; `out` must be writable.
 */
enum HspsStatus hsps_estimate(const struct HspsConfig *config,
                              const struct HspsRawCounts *counts,
                              struct HspsFigures *out);

/**
 * Estimate with parametric-bootstrap uncertainties.
 *
 * # Safety
 * `config` and `counts` must be valid; `out` must be writable.
 */
enum HspsStatus hsps_bootstrap(const struct HspsConfig *config,
                               const struct HspsRawCounts *counts,
                               size_t n_resamples,
                               uint64_t seed,
                               struct HspsFigures *out);

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `len` bytes. Returns the buffer size the full message needs.
 *
 * # Safety
 * `buf` must be writable for `len` bytes, or null with `len` zero.
 */
size_t hsps_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hsps_version(void);

#endif  /* HSPS_H */
