#ifndef TOA_LAB_H
#define TOA_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes.
typedef enum TlStatus {
  TL_STATUS_OK = 0,
  TL_STATUS_NULL_POINTER = 1,
  TL_STATUS_INVALID_ARGUMENT = 2,
  TL_STATUS_INVALID_GRID = 3,
  TL_STATUS_NON_CONVERGENCE = 4,
  TL_STATUS_NON_FINITE = 5,
  TL_STATUS_GRID_TOO_COARSE = 6,
  TL_STATUS_KERNEL_SINGULAR = 7,
  TL_STATUS_ENERGY_CUTOFF_TOO_LOW = 8,
  TL_STATUS_UNSUPPORTED = 9,
  TL_STATUS_BUFFER_TOO_SMALL = 10,
  TL_STATUS_PANIC = 11,
} TlStatus;

// Arrival-time densities selectable through [`tl_toa_distribution`].
typedef enum TlToaKind {
  // Position-momentum readout with a Gaussian window of width `sigma`.
  TL_TOA_KIND_KW = 0,
  // Covariant density of the Wigner function; `sigma` is ignored.
  TL_TOA_KIND_DELTA_WIGNER = 1,
  // `Π_J̃` with the spectrogram kernel of width `sigma`.
  TL_TOA_KIND_J_TILDE = 2,
  // Kijowski's density; `sigma` is ignored.
  TL_TOA_KIND_KIJOWSKI = 3,
  // von Neumann time pointer of width `sigma`.
  TL_TOA_KIND_VON_NEUMANN = 4,
} TlToaKind;

// Arrival-time density on a grid.
typedef struct TlDistribution TlDistribution;

// Energy-time apparatus.
typedef struct TlEtApparatus TlEtApparatus;

// Energy-time joint density on a grid, row-major in `μE`.
typedef struct TlEtJoint TlEtJoint;

// A particle state.
typedef struct TlState TlState;

// Uniform grid `min, …, max` with `n` points.
typedef struct TlGrid {
  double min;
  double max;
  size_t n;
} TlGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *tl_version(void);

// Message for the last failed call on this thread, or null. Valid until the next call on this thread.
const char *tl_last_error_message(void);

// Single Gaussian packet in atomic units.
//
// # Safety
// `out` must be valid for writes.
enum TlStatus tl_state_gaussian(double x0, double k0, double delta, struct TlState **out);

// State from a JSON descriptor.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid for writes.
enum TlStatus tl_state_from_json(const char *json, struct TlState **out);

// # Safety
// `state` must come from a `tl_state_*` constructor and not be used afterwards.
void tl_state_free(struct TlState *state);

// # Safety
// `out` must be valid for writes.
enum TlStatus tl_et_apparatus_new(double spread_i, double spread_f, struct TlEtApparatus **out);

// # Safety
// `app` must come from [`tl_et_apparatus_new`] and not be used afterwards.
void tl_et_apparatus_free(struct TlEtApparatus *app);

// Tabulates the [`TlToaKind`] density `kind` over `grid_spec` for reference time `t`.
//
// # Safety
// `state` must be a live handle; `out` must be valid for writes.
enum TlStatus tl_toa_distribution(const struct TlState *state,
                                  int kind,
                                  double sigma,
                                  double t,
                                  struct TlGrid grid_spec,
                                  struct TlDistribution **out);

// Kijowski's density at a single `T`.
//
// # Safety
// `state` must be a live handle; `out` must be valid for writes.
enum TlStatus tl_pi_kijowski(const struct TlState *state, double t_arrival, double t, double *out);

// Number of grid points.
//
// # Safety
// `dist` must be a live handle; `out` must be valid for writes.
enum TlStatus tl_distribution_len(const struct TlDistribution *dist, size_t *out);

// Copies the values into `buf`, which holds `len` doubles.
//
// # Safety
// `dist` must be a live handle; `buf` must be valid for `len` writes.
enum TlStatus tl_distribution_values(const struct TlDistribution *dist, double *buf, size_t len);

// Trapezoid mass over the grid.
//
// # Safety
// `dist` must be a live handle; `out` must be valid for writes.
enum TlStatus tl_distribution_norm_estimate(const struct TlDistribution *dist, double *out);

// # Safety
// `dist` must come from a distribution constructor and not be used afterwards.
void tl_distribution_free(struct TlDistribution *dist);

// `ρ(μE,μT)` at one point, with the default energy cutoff.
//
// # Safety
// `state` and `app` must be live handles; `out` must be valid for writes.
enum TlStatus tl_rho_et(const struct TlState *state,
                        const struct TlEtApparatus *app,
                        double mu_e,
                        double mu_t,
                        double t,
                        double *out);

// Joint density on `mu_e_grid × mu_t_grid`.
//
// # Safety
// `state` and `app` must be live handles; `out` must be valid for writes.
enum TlStatus tl_et_joint(const struct TlState *state,
                          const struct TlEtApparatus *app,
                          double t,
                          struct TlGrid mu_e_grid,
                          struct TlGrid mu_t_grid,
                          struct TlEtJoint **out);

// Number of values (`μE` points times `μT` points).
//
// # Safety
// `joint` must be a live handle; `out` must be valid for writes.
enum TlStatus tl_et_joint_len(const struct TlEtJoint *joint, size_t *out);

// Copies the row-major values into `buf`, which holds `len` doubles.
//
// # Safety
// `joint` must be a live handle; `buf` must be valid for `len` writes.
enum TlStatus tl_et_joint_values(const struct TlEtJoint *joint, double *buf, size_t len);

// Trapezoid mass over both grids.
//
// # Safety
// `joint` must be a live handle; `out` must be valid for writes.
enum TlStatus tl_et_joint_mass(const struct TlEtJoint *joint, double *out);

// `μT` marginal of a joint density as a new distribution handle.
//
// # Safety
// `joint` must be a live handle; `out` must be valid for writes.
enum TlStatus tl_et_joint_time_marginal(const struct TlEtJoint *joint, struct TlDistribution **out);

// # Safety
// `joint` must come from [`tl_et_joint`] and not be used afterwards.
void tl_et_joint_free(struct TlEtJoint *joint);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOA_LAB_H */
