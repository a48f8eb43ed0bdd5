#ifndef VLCSIM_H
#define VLCSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VlcsimStatus {
  VLCSIM_STATUS_OK = 0,
  VLCSIM_STATUS_NULL_POINTER = 1,
  VLCSIM_STATUS_INVALID_INPUT = 2,
  VLCSIM_STATUS_CONFIG = 3,
  VLCSIM_STATUS_IO = 4,
  VLCSIM_STATUS_BUFFER_TOO_SMALL = 5,
  VLCSIM_STATUS_PANIC = 6,
} VlcsimStatus;

typedef enum VlcsimParity {
  VLCSIM_PARITY_NONE = 0,
  VLCSIM_PARITY_EVEN = 1,
  VLCSIM_PARITY_ODD = 2,
  VLCSIM_PARITY_MARK = 3,
  VLCSIM_PARITY_SPACE = 4,
} VlcsimParity;

typedef enum VlcsimFormat {
  VLCSIM_FORMAT_CSV = 0,
  VLCSIM_FORMAT_JSON = 1,
} VlcsimFormat;

/**
 * Opaque sweep configuration.
 */
typedef struct VlcsimConfig VlcsimConfig;

/**
 * Opaque sweep result.
 */
typedef struct VlcsimReport VlcsimReport;

/**
 * Link geometry. Angles in degrees, lengths in metres, areas in m^2.
 */
typedef struct VlcsimChannel {
  double area_rx;
  double half_angle;
  double theta;
  double psi;
  double psi_c;
  double d;
  double d1;
  double d2;
  double alpha;
  double beta;
  double area_reflector;
  double rho;
  double tx_power;
  double responsivity_gain;
  double noise_power;
} VlcsimChannel;

/**
 * Character framing.
 */
typedef struct VlcsimUart {
  uint8_t data_bits;
  enum VlcsimParity parity;
  uint8_t stop_bits;
  double baud;
  uint32_t oversample;
} VlcsimUart;

/**
 * One row of a sweep report. Fields that do not apply are NaN
 * (`snr_db`, `distance_m`, rates of a skipped point) or 0 (counts).
 */
typedef struct VlcsimPointSummary {
  double baud;
  double snr_db;
  double distance_m;
  uint64_t frame_len;
  uint64_t sync_len;
  uint64_t seed;
  bool skipped;
  uint64_t frames_sent;
  uint64_t clean;
  uint64_t substituted;
  uint64_t dropped;
  double p_bse;
  double reliability;
  double measured_ser;
  double analytic_ber;
  double analytic_ser;
  double analytic_pfail;
  double analytic_perr;
} VlcsimPointSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread; empty if none.
 */
const char *vlcsim_last_error(void);

const char *vlcsim_version(void);

/**
 * OOK bit error probability at linear SNR `snr`.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum VlcsimStatus vlcsim_ber_ook(double snr, double *out);

/**
 * Character error rate of an 8-data-bit UART at linear SNR `snr`, clamped
 * to [0, 1].
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum VlcsimStatus vlcsim_ser_ttl(double snr, double *out);

/**
 * Probability that a frame's sync word is not recognised.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum VlcsimStatus vlcsim_p_fail(uint32_t n_sync,
                                uint32_t n_payload,
                                double p_s,
                                uint32_t alphabet_size,
                                double *out);

/**
 * Probability of a false or failed frame synchronisation.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum VlcsimStatus vlcsim_p_err(uint32_t n_sync,
                               uint32_t n_payload,
                               double p_s,
                               uint32_t alphabet_size,
                               double *out);

/**
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum VlcsimStatus vlcsim_lambertian_order(double half_angle_deg, double *out);

/**
 * Largest link distance with no first-order reflection in view.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum VlcsimStatus vlcsim_max_los_distance(double w,
                                          double alpha_plus_beta_deg,
                                          double theta_max_deg,
                                          double *out);

/**
 * Fills `out` with the default link geometry.
 *
 * # Safety
 * `out` must be a valid pointer to a `VlcsimChannel`.
 */
enum VlcsimStatus vlcsim_channel_default(struct VlcsimChannel *out);

/**
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum VlcsimStatus vlcsim_h_los(const struct VlcsimChannel *params, double *out);

/**
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum VlcsimStatus vlcsim_h_nlos(const struct VlcsimChannel *params, double *out);

/**
 * Linear SNR the link in `params` delivers.
 *
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum VlcsimStatus vlcsim_received_snr(const struct VlcsimChannel *params,
                                      bool include_nlos,
                                      double *out);

/**
 * Fills `out` with 8N1 framing at 10 kbaud and 16x oversampling.
 *
 * # Safety
 * `out` must be a valid pointer to a `VlcsimUart`.
 */
enum VlcsimStatus vlcsim_uart_default(struct VlcsimUart *out);

/**
 * Encodes `len` bytes into line bits (one 0/1 byte per bit period).
 * `*written` always receives the required length; the call fails with
 * `BufferTooSmall` when `cap` is short.
 *
 * # Safety
 * `uart` and `written` must be valid; `bytes` must hold `len` bytes and
 * `out` must have room for `cap` bytes.
 */
enum VlcsimStatus vlcsim_uart_encode(const struct VlcsimUart *uart,
                                     const uint8_t *bytes,
                                     size_t len,
                                     uint8_t *out,
                                     size_t cap,
                                     size_t *written);

/**
 * Decodes a clean oversampled rendering of `bits` (as produced by
 * [`vlcsim_uart_encode`]), framed by one idle bit on each side.
 *
 * # Safety
 * `uart` and `written` must be valid; `bits` must hold `len` bytes and
 * `out` must have room for `cap` bytes.
 */
enum VlcsimStatus vlcsim_uart_decode_bits(const struct VlcsimUart *uart,
                                          const uint8_t *bits,
                                          size_t len,
                                          uint8_t *out,
                                          size_t cap,
                                          size_t *written);

/**
 * Default sweep configuration.
 *
 * # Safety
 * `out` must be a valid pointer; the handle stored there must be released
 * with [`vlcsim_config_free`].
 */
enum VlcsimStatus vlcsim_config_new(struct VlcsimConfig **out);

/**
 * Parses key=value configuration text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VlcsimStatus vlcsim_config_parse(const char *text, struct VlcsimConfig **out);

/**
 * Loads a configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VlcsimStatus vlcsim_config_load(const char *path, struct VlcsimConfig **out);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum VlcsimStatus vlcsim_config_set_seed(struct VlcsimConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum VlcsimStatus vlcsim_config_set_workers(struct VlcsimConfig *cfg, size_t workers);

/**
 * Number of parameter points the sweep will visit.
 *
 * # Safety
 * `cfg` and `out` must be valid.
 */
enum VlcsimStatus vlcsim_config_point_count(const struct VlcsimConfig *cfg, size_t *out);

/**
 * # Safety
 * `cfg` must be null or a handle from this library not yet freed.
 */
void vlcsim_config_free(struct VlcsimConfig *cfg);

/**
 * Runs the sweep. Blocks until every point finishes.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer; the report must
 * be released with [`vlcsim_report_free`].
 */
enum VlcsimStatus vlcsim_sweep_run(const struct VlcsimConfig *cfg, struct VlcsimReport **out);

/**
 * # Safety
 * `report` and `out` must be valid.
 */
enum VlcsimStatus vlcsim_report_point_count(const struct VlcsimReport *report, size_t *out);

/**
 * # Safety
 * `report` and `out` must be valid.
 */
enum VlcsimStatus vlcsim_report_point(const struct VlcsimReport *report,
                                      size_t index,
                                      struct VlcsimPointSummary *out);

/**
 * Writes the report to `path`.
 *
 * # Safety
 * `report` must be a live handle and `path` a NUL-terminated string.
 */
enum VlcsimStatus vlcsim_report_write(const struct VlcsimReport *report,
                                      const char *path,
                                      enum VlcsimFormat format);

/**
 * # Safety
 * `report` must be null or a handle from this library not yet freed.
 */
void vlcsim_report_free(struct VlcsimReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VLCSIM_H */
