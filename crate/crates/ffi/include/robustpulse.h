#ifndef ROBUSTPULSE_H
#define ROBUSTPULSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

#define RP_FAMILY_RECT 0

#define RP_FAMILY_CORPSE 1

#define RP_FAMILY_SCROFULOUS 2

#define RP_FAMILY_BB1 3

#define RP_PLACEMENT_BEFORE 0

#define RP_PLACEMENT_AFTER 1

#define RP_PLACEMENT_SPLIT 2

#define RP_G_AMPLITUDE 0

#define RP_G_DURATION 1

#define RP_INIT_RANDOM 0

#define RP_INIT_RECT 1

#define RP_OUTCOME_CONVERGED 0

#define RP_OUTCOME_MAX_ITERATIONS 1

#define RP_OUTCOME_NO_IMPROVEMENT 2

/**
 * Result code of every fallible call.
 */
typedef enum RpStatus {
  RP_STATUS_OK = 0,
  RP_STATUS_NULL_POINTER = 1,
  RP_STATUS_INVALID_INPUT = 2,
  RP_STATUS_INVALID_THETA = 3,
  RP_STATUS_DEGENERATE_STATE = 4,
  RP_STATUS_ZERO_REFERENCE = 5,
  RP_STATUS_OUT_OF_BOUNDS = 6,
  RP_STATUS_FIT_DEGENERATE = 7,
  RP_STATUS_NON_CONVERGENCE = 8,
  RP_STATUS_NO_IMPROVEMENT = 9,
  RP_STATUS_PARSE = 10,
  RP_STATUS_BUFFER_TOO_SMALL = 11,
  RP_STATUS_PANIC = 12,
} RpStatus;

/**
 * Fidelity grid over `(f, g)`.
 */
typedef struct RpGrid RpGrid;

/**
 * Piecewise-constant pulse.
 */
typedef struct RpPulse RpPulse;

/**
 * Parameters of `rp_design`. Fill with `rp_design_params_default` first.
 */
typedef struct RpDesignParams {
  double target_theta;
  double target_phi;
  uint32_t n_steps;
  /**
   * µs.
   */
  double step_duration;
  /**
   * rad/µs.
   */
  double rabi_nominal;
  double max_amplitude;
  double f_min;
  double f_max;
  uint32_t f_samples;
  double g_min;
  double g_max;
  uint32_t g_samples;
  uint32_t g_mode;
  uint32_t max_iterations;
  double convergence_tol;
  uint32_t init;
  uint64_t seed;
} RpDesignParams;

/**
 * Result of `rp_fit_fringe`.
 */
typedef struct RpFit {
  double theta_m;
  double phi_m;
  double sigma_theta;
  double sigma_phi;
} RpFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on the calling thread, or an
 * empty string. The pointer stays valid until the next `rp_*` call on the
 * same thread.
 */
const char *rp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rp_version(void);

/**
 * Nominal Rabi frequency 2π × 10 kHz in rad/µs.
 */
double rp_default_rabi(void);

/**
 * Builds a library pulse. `theta` is the rotation angle (CORPSE and
 * SCROFULOUS require π), `drive_phase` the phase of the nominal rotation,
 * `placement` is only read for BB1 and `n_steps` only for rectangular
 * pulses.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum RpStatus rp_pulse_builtin(uint32_t family,
                               double theta,
                               double drive_phase,
                               uint32_t placement,
                               uint32_t n_steps,
                               double rabi_nominal,
                               struct RpPulse **out);

/**
 * Builds a pulse from `n` steps given as parallel arrays.
 *
 * # Safety
 * Each array must hold `n` readable elements; `out` must be writable.
 */
enum RpStatus rp_pulse_from_steps(const double *amplitudes,
                                  const double *phases,
                                  const double *durations,
                                  uintptr_t n,
                                  double rabi_nominal,
                                  struct RpPulse **out);

/**
 * Parses the text pulse-file format.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out` must be writable.
 */
enum RpStatus rp_pulse_parse(const char *source, struct RpPulse **out);

/**
 * Serializes a pulse to the text pulse-file format. `comment` may be null.
 * The returned string must be released with `rp_string_free`.
 *
 * # Safety
 * `pulse` must be a live handle, `comment` null or NUL-terminated, `out`
 * writable.
 */
enum RpStatus rp_pulse_to_text(const struct RpPulse *pulse, const char *comment, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void rp_string_free(char *s);

/**
 * # Safety
 * `pulse` must be null or a handle returned by this library and not yet
 * freed.
 */
void rp_pulse_free(struct RpPulse *pulse);

/**
 * Number of steps, or 0 for a null handle.
 *
 * # Safety
 * `pulse` must be null or a live handle.
 */
uintptr_t rp_pulse_len(const struct RpPulse *pulse);

/**
 * Total duration in µs, or NaN for a null handle.
 *
 * # Safety
 * `pulse` must be null or a live handle.
 */
double rp_pulse_duration(const struct RpPulse *pulse);

/**
 * Copies the steps into parallel arrays of at least `rp_pulse_len`
 * elements.
 *
 * # Safety
 * `pulse` must be a live handle and each array must hold `capacity`
 * writable elements.
 */
enum RpStatus rp_pulse_steps(const struct RpPulse *pulse,
                             double *amplitudes,
                             double *phases,
                             double *durations,
                             uintptr_t capacity);

/**
 * Applies the pulse under errors `(f, g)` to the preparation
 * `a0|0⟩⟨0| + (1 − a0)|1⟩⟨1|` and reports the `|1⟩` population and the
 * Bloch vector. `bloch` may be null.
 *
 * # Safety
 * `pulse` must be a live handle, `population_one` writable and `bloch`
 * null or writable for three elements.
 */
enum RpStatus rp_propagate(const struct RpPulse *pulse,
                           double f,
                           double g,
                           uint32_t g_mode,
                           double a0,
                           double *population_one,
                           double *bloch);

/**
 * Polar and azimuthal angles of the pure state reached from `|0⟩`.
 *
 * # Safety
 * `pulse` must be a live handle; `theta` and `phi` writable.
 */
enum RpStatus rp_bloch_angles(const struct RpPulse *pulse,
                              double f,
                              double g,
                              uint32_t g_mode,
                              double *theta,
                              double *phi);

/**
 * State fidelity between the target `|θ, φ⟩` and the state reached from
 * `|0⟩` under errors `(f, g)`.
 *
 * # Safety
 * `pulse` must be a live handle; `fidelity` writable.
 */
enum RpStatus rp_state_fidelity(const struct RpPulse *pulse,
                                double target_theta,
                                double target_phi,
                                double f,
                                double g,
                                uint32_t g_mode,
                                double *fidelity);

/**
 * Sweeps the state fidelity over `f_axis × g_axis` (both sorted).
 *
 * # Safety
 * `pulse` must be a live handle, the axes readable for `nf` and `ng`
 * elements, `out` writable.
 */
enum RpStatus rp_grid_sweep(const struct RpPulse *pulse,
                            double target_theta,
                            double target_phi,
                            double a0,
                            const double *f_axis,
                            uintptr_t nf,
                            const double *g_axis,
                            uintptr_t ng,
                            uint32_t g_mode,
                            struct RpGrid **out);

/**
 * # Safety
 * `grid` must be null or a handle returned by this library and not yet
 * freed.
 */
void rp_grid_free(struct RpGrid *grid);

/**
 * Grid shape; either pointer may be null.
 *
 * # Safety
 * `grid` must be a live handle.
 */
enum RpStatus rp_grid_shape(const struct RpGrid *grid, uintptr_t *nf, uintptr_t *ng);

/**
 * Copies the values in row-major order (`values[i * ng + j]` is
 * `F(f_i, g_j)`).
 *
 * # Safety
 * `grid` must be a live handle and `values` writable for `capacity`
 * elements.
 */
enum RpStatus rp_grid_values(const struct RpGrid *grid, double *values, uintptr_t capacity);

/**
 * Reference fidelity `Fm`, or NaN for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
double rp_grid_reference(const struct RpGrid *grid);

/**
 * Bilinear interpolation at `(f, g)` inside the grid.
 *
 * # Safety
 * `grid` must be a live handle; `value` writable.
 */
enum RpStatus rp_grid_interpolate(const struct RpGrid *grid, double f, double g, double *value);

/**
 * Writes 1 where `F/Fm > ratio` and 0 elsewhere, row-major.
 *
 * # Safety
 * `grid` must be a live handle and `mask` writable for `capacity` bytes.
 */
enum RpStatus rp_grid_mask(const struct RpGrid *grid,
                           double ratio,
                           uint8_t *mask,
                           uintptr_t capacity);

/**
 * Defaults: π/2 target at azimuth −π/2, 200 steps of 0.5 µs, 2π × 10 kHz,
 * amplitude cap 1, 9 × 5 ensemble over f ∈ [−1, 1], g ∈ [−0.4, 0.4],
 * 2000 iterations, tolerance 1e-8, random init with seed 0.
 *
 * # Safety
 * `params` must be writable.
 */
enum RpStatus rp_design_params_default(struct RpDesignParams *params);

/**
 * Runs the ensemble-robust design. On success `out` receives the pulse,
 * `final_cost` the mean ensemble fidelity and `outcome` one of the
 * `RP_OUTCOME_*` codes; `final_cost` and `outcome` may be null.
 *
 * # Safety
 * `params` must be readable, `out` writable, `final_cost` and `outcome`
 * null or writable.
 */
enum RpStatus rp_design(const struct RpDesignParams *params,
                        struct RpPulse **out,
                        double *final_cost,
                        uint32_t *outcome);

/**
 * Simulates a Ramsey fringe of `n_phases` equally spaced analysis phases
 * with `shots` repetitions each. `counts` receives the `|1⟩` counts per
 * phase and `direct` the count of the direct readout (may be null).
 *
 * # Safety
 * `pulse` must be a live handle, `counts` writable for `capacity`
 * elements and `direct` null or writable.
 */
enum RpStatus rp_ramsey_simulate(const struct RpPulse *pulse,
                                 double f,
                                 double g,
                                 uint32_t g_mode,
                                 double a0,
                                 uint64_t shots,
                                 uint32_t n_phases,
                                 uint64_t seed,
                                 uint64_t *counts,
                                 uintptr_t capacity,
                                 uint64_t *direct);

/**
 * Fits `½(1 + sin θm cos(φm − Φ))` to a fringe. Pass `direct_shots = 0`
 * when no direct readout was taken. A flat fringe yields
 * `RP_STATUS_FIT_DEGENERATE` with `theta_m` set and the other fields NaN.
 *
 * # Safety
 * `phases` and `counts` must be readable for `n` elements; `fit` writable.
 */
enum RpStatus rp_fit_fringe(const double *phases,
                            const uint64_t *counts,
                            uintptr_t n,
                            uint64_t shots,
                            uint64_t direct_count,
                            uint64_t direct_shots,
                            struct RpFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBUSTPULSE_H */
