#ifndef PIFILTER_H
#define PIFILTER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum PifStatus {
  PIF_STATUS_OK = 0,
  PIF_STATUS_NULL_POINTER = 1,
  PIF_STATUS_INVALID_ARGUMENT = 2,
  PIF_STATUS_INVALID_CONFIG = 3,
  PIF_STATUS_SINGULAR = 4,
  PIF_STATUS_QUADRATURE = 5,
  PIF_STATUS_ILL_POSED_FIT = 6,
  PIF_STATUS_INDETERMINATE = 7,
  PIF_STATUS_INFEASIBLE_SEED = 8,
  PIF_STATUS_IO = 9,
  PIF_STATUS_PANIC = 10,
} PifStatus;

typedef enum PifHomodyne {
  /**
   * One angle maximising the band integral.
   */
  PIF_HOMODYNE_GLOBAL = 0,
  /**
   * Best angle at every frequency.
   */
  PIF_HOMODYNE_PER_FREQUENCY = 1,
} PifHomodyne;

/**
 * Opaque interferometer configuration.
 */
typedef struct PifConfig PifConfig;

/**
 * Opaque filter gain.
 */
typedef struct PifGain PifGain;

/**
 * Closed-loop verdict of a Nyquist run.
 */
typedef struct PifVerdict {
  int64_t n;
  int64_t p;
  int64_t z;
  double rho_min;
  bool stable;
} PifVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *pif_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pif_version(void);

/**
 * The lossless 4 km / 40 m reference configuration.
 */
struct PifConfig *pif_config_reference(void);

/**
 * Parse a configuration from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out_config` must be writable.
 */
enum PifStatus pif_config_from_json(const char *json, struct PifConfig **out_config);

/**
 * Replace the loss budget of a configuration.
 *
 * # Safety
 * `config` must come from this library and not have been freed.
 */
enum PifStatus pif_config_set_losses(struct PifConfig *config,
                                     double lambda_o,
                                     double lambda_f,
                                     double lambda_s);

/**
 * # Safety
 * `config` must come from this library or be NULL; it must not be used afterwards.
 */
void pif_config_free(struct PifConfig *config);

/**
 * Sensing-cavity bandwidth in rad/s.
 *
 * # Safety
 * `config` must be a live handle; `out_gamma_s` must be writable.
 */
enum PifStatus pif_gamma_s(const struct PifConfig *config, double *out_gamma_s);

struct PifGain *pif_gain_unity(void);

struct PifGain *pif_gain_optimal(void);

struct PifGain *pif_gain_detuned(double phi);

/**
 * Optomechanical gain with mechanical frequency `f_m` (Hz), quality factor
 * `q_m` and coupling `g` (rad/s); `g < 0` selects the PT condition of `config`.
 *
 * # Safety
 * `config` must be a live handle; `out_gain` must be writable.
 */
enum PifStatus pif_gain_pt(const struct PifConfig *config,
                           double f_m,
                           double q_m,
                           double g,
                           struct PifGain **out_gain);

/**
 * Rational gain from root arrays in rad/s (`n` zeros and `n` poles).
 *
 * # Safety
 * Each array must hold `n` values; `out_gain` must be writable.
 */
enum PifStatus pif_gain_zpk(const double *zeros_re,
                            const double *zeros_im,
                            const double *poles_re,
                            const double *poles_im,
                            uintptr_t n,
                            double k,
                            struct PifGain **out_gain);

/**
 * Number of poles of a rational gain, or 0 for other gain kinds.
 *
 * # Safety
 * `gain` must be a live handle.
 */
uintptr_t pif_gain_order(const struct PifGain *gain);

/**
 * Copy the roots (rad/s) and gain of a rational gain into caller arrays of
 * length `pif_gain_order(gain)`.
 *
 * # Safety
 * Arrays must hold `pif_gain_order(gain)` values; `out_k` must be writable.
 */
enum PifStatus pif_gain_zpk_roots(const struct PifGain *gain,
                                  double *zeros_re,
                                  double *zeros_im,
                                  double *poles_re,
                                  double *poles_im,
                                  double *out_k);

/**
 * # Safety
 * `gain` must come from this library or be NULL; it must not be used afterwards.
 */
void pif_gain_free(struct PifGain *gain);

/**
 * SNR enhancement `chi^2` at `omega` (rad/s) with the homodyne angle
 * chosen per frequency; the angle is written to `out_phi_lo` when non-NULL.
 *
 * # Safety
 * Handles must be live; `out_chi_sq` must be writable.
 */
enum PifStatus pif_chi_sq(const struct PifConfig *config,
                          const struct PifGain *gain,
                          double omega,
                          double *out_chi_sq,
                          double *out_phi_lo);

/**
 * Band integral of `chi^2` over `[lo, hi]` rad/s, normalised by `pi / tau_s`.
 *
 * # Safety
 * Handles must be live; `out_normalized` must be writable.
 */
enum PifStatus pif_integral(const struct PifConfig *config,
                            const struct PifGain *gain,
                            enum PifHomodyne homodyne,
                            double lo,
                            double hi,
                            double *out_normalized);

/**
 * Nyquist verdict; `omega_max <= 0` selects the default contour range.
 *
 * # Safety
 * Handles must be live; `out_verdict` must be writable.
 */
enum PifStatus pif_nyquist(const struct PifConfig *config,
                           const struct PifGain *gain,
                           double omega_max,
                           struct PifVerdict *out_verdict);

/**
 * Optimize a rational seed; the result is a new rational gain handle.
 *
 * # Safety
 * Handles must be live; output pointers must be writable.
 */
enum PifStatus pif_optimize(const struct PifConfig *config,
                            const struct PifGain *seed,
                            uintptr_t max_iter,
                            struct PifGain **out_gain,
                            double *out_normalized,
                            bool *out_stable);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIFILTER_H */
