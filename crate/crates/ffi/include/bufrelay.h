#ifndef BUFRELAY_H
#define BUFRELAY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a call.
typedef enum {
  BR_STATUS_OK = 0,
  BR_STATUS_NULL_POINTER = 1,
  BR_STATUS_INVALID_ARGUMENT = 2,
  BR_STATUS_DOMAIN = 3,
  BR_STATUS_QUADRATURE = 4,
  BR_STATUS_BRACKET = 5,
  BR_STATUS_NO_CONVERGENCE = 6,
  BR_STATUS_BRANCH_RESOLUTION = 7,
  BR_STATUS_INFEASIBLE = 8,
  BR_STATUS_CONFIG = 9,
  BR_STATUS_PANIC = 10,
} BrStatus;

typedef enum {
  // `W0`, `W >= -1`.
  BR_BRANCH_PRINCIPAL = 0,
  // `W-1`, `W <= -1`, defined on `[-1/e, 0)`.
  BR_BRANCH_LOWER = 1,
} BrBranch;

// Decision function `F` of the threshold rule.
typedef enum {
  // `F(x) = x`
  BR_DECISION_IDENTITY = 0,
  // `F(x) = log2(1 + x)`
  BR_DECISION_LOG_CAPACITY = 1,
} BrDecision;

typedef enum {
  BR_PROTOCOL_CONV_NO_BUFFER = 0,
  BR_PROTOCOL_CONV_BUFFER = 1,
  BR_PROTOCOL_ADAPTIVE_FIXED = 2,
  BR_PROTOCOL_ADAPTIVE_PA = 3,
  BR_PROTOCOL_STARVED = 4,
  BR_PROTOCOL_QUEUE_LIMITED = 5,
} BrProtocol;

// Opaque FIFO relay buffer.
typedef struct BrBuffer BrBuffer;

// Opaque simulation configuration.
typedef struct BrSimConfig BrSimConfig;

// Arrivals and departures at one threshold, bits/slot.
typedef struct {
  double arrival;
  double throughput;
  // `arrival - throughput`
  double residual;
} BrBalance;

// An operating point found by a solver. `lambda` is NaN when the problem
// has no water level.
typedef struct {
  double rho;
  double lambda;
  double tau;
  // Largest absolute residual.
  double max_residual;
  uint32_t iterations;
  bool converged;
} BrSolution;

// Queue moments and the mean delay bound at one threshold.
typedef struct {
  double m_s1;
  double m_r1;
  double m_s2;
  double m_r2;
  double xi;
  double bound;
} BrDelayPoint;

// Simulation statistics over the measured slots. Optional quantities are
// NaN when undefined.
typedef struct {
  uint64_t slots_measured;
  double throughput;
  double throughput_stderr;
  double arrival_rate;
  double admitted_rate;
  double mean_queue;
  double mean_delay_fifo;
  double mean_delay_little;
  double drop_prob;
  double overflow_event_prob;
  double mean_power;
  uint64_t source_slots;
  uint64_t relay_slots;
  uint64_t idle_slots;
} BrMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` as a
// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
// message length in bytes, excluding the terminator; 0 means no error.
//
// # Safety
// `buf` must be null or valid for writes of `len` bytes.
size_t br_last_error_message(char *buf, size_t len);

// Exponential integral `E1(x)`, `x > 0`.
//
// # Safety
// `out` must be valid for writes.
BrStatus br_exp_integral_e1(double x, double *out);

// Lambert W on the chosen real branch.
//
// # Safety
// `out` must be valid for writes.
BrStatus br_lambert_w(BrBranch branch, double x, double *out);

// Throughput of conventional relaying without a buffer, Rayleigh links.
//
// # Safety
// `out` must be valid for writes.
BrStatus br_tau_conv1(double omega_s, double omega_r, double *out);

// Throughput of conventional relaying with an unlimited buffer, Rayleigh
// links.
//
// # Safety
// `out` must be valid for writes.
BrStatus br_tau_conv2(double omega_s, double omega_r, double *out);

// Arrival and departure rates of the threshold rule at `rho`.
//
// # Safety
// `out` must be valid for writes.
BrStatus br_threshold_balance(BrDecision f,
                              double rho,
                              double omega_s,
                              double omega_r,
                              BrBalance *out);

// Throughput-optimal threshold with fixed powers.
//
// # Safety
// `out` must be valid for writes.
BrStatus br_solve_rho_opt(BrDecision f, double omega_s, double omega_r, BrSolution *out);

// Joint threshold and water level under average power `gamma_bar`, with
// unit-power mean channel gains `omega_bar_s`, `omega_bar_r`.
//
// # Safety
// `out` must be valid for writes.
BrStatus br_solve_lambda_rho(double omega_bar_s,
                             double omega_bar_r,
                             double gamma_bar,
                             BrSolution *out);

// Queue moments and mean delay bound of the starved-buffer rule at `rho`
// (`F(x) = x`).
//
// # Safety
// `out` must be valid for writes.
BrStatus br_delay_bound(double rho, double omega_s, double omega_r, BrDelayPoint *out);

// Threshold whose delay bound equals `target`. Returns
// `BR_STATUS_INFEASIBLE` when the target is below the smallest bound.
//
// # Safety
// `out` must be valid for writes.
BrStatus br_solve_rho_for_delay(double target, double omega_s, double omega_r, BrSolution *out);

// New simulation of `slots` slots over Rayleigh links with mean SNRs (or
// gains, for `BR_PROTOCOL_ADAPTIVE_PA`) `omega_s`, `omega_r`. Defaults:
// `rho = 1`, log-capacity decision, unlimited buffer, seed 0.
//
// # Safety
// `out` must be valid for writes.
BrStatus br_sim_config_new(BrProtocol protocol,
                           double omega_s,
                           double omega_r,
                           uint64_t slots,
                           BrSimConfig **out);

// Releases a configuration. Null is ignored.
//
// # Safety
// `config` must be null or come from [`br_sim_config_new`] and not be used
// afterwards.
void br_sim_config_free(BrSimConfig *config);

// # Safety
// `config` must be a live handle.
BrStatus br_sim_config_set_threshold(BrSimConfig *config, BrDecision f, double rho);

// Water level and power budget of `BR_PROTOCOL_ADAPTIVE_PA`.
//
// # Safety
// `config` must be a live handle.
BrStatus br_sim_config_set_power(BrSimConfig *config, double lambda, double gamma_bar);

// Buffer size in bits; `INFINITY` for none.
//
// # Safety
// `config` must be a live handle.
BrStatus br_sim_config_set_q_max(BrSimConfig *config, double q_max);

// # Safety
// `config` must be a live handle.
BrStatus br_sim_config_set_seed(BrSimConfig *config, uint64_t seed, uint64_t stream);

// # Safety
// `config` must be a live handle.
BrStatus br_sim_config_set_warmup(BrSimConfig *config, uint64_t warmup_slots);

// Frame length of `BR_PROTOCOL_CONV_BUFFER`.
//
// # Safety
// `config` must be a live handle.
BrStatus br_sim_config_set_frame(BrSimConfig *config, uint64_t frame_slots);

// Queue level whose exceedance frequency is reported.
//
// # Safety
// `config` must be a live handle.
BrStatus br_sim_config_set_overflow_threshold(BrSimConfig *config, double threshold);

// Runs the simulation described by `config`.
//
// # Safety
// `config` must be a live handle and `out` valid for writes.
BrStatus br_simulate(const BrSimConfig *config, BrMetrics *out);

// New empty buffer of `capacity` bits (`INFINITY` for unlimited).
//
// # Safety
// `out` must be valid for writes.
BrStatus br_buffer_new(double capacity, BrBuffer **out);

// Releases a buffer. Null is ignored.
//
// # Safety
// `buffer` must be null or come from [`br_buffer_new`] and not be used
// afterwards.
void br_buffer_free(BrBuffer *buffer);

// Offers `bits` arriving in `slot`; stores the admitted amount in
// `admitted` (may be null). The excess is dropped.
//
// # Safety
// `buffer` must be a live handle; `admitted` null or valid for writes.
BrStatus br_buffer_enqueue(BrBuffer *buffer, double bits, uint64_t slot, double *admitted);

// Serves up to `link_bits` in `slot`, oldest first; stores the bits sent
// in `sent` (may be null).
//
// # Safety
// `buffer` must be a live handle; `sent` null or valid for writes.
BrStatus br_buffer_dequeue(BrBuffer *buffer, double link_bits, uint64_t slot, double *sent);

// Bits currently queued; NaN for a null handle.
//
// # Safety
// `buffer` must be null or a live handle.
double br_buffer_len_bits(const BrBuffer *buffer);

// Mean FIFO delay of departed bits in slots; NaN before any departure or
// for a null handle.
//
// # Safety
// `buffer` must be null or a live handle.
double br_buffer_mean_delay(const BrBuffer *buffer);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BUFRELAY_H */
