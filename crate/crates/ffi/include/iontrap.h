#ifndef IONTRAP_H
#define IONTRAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum IontrapStatus {
  IONTRAP_STATUS_OK = 0,
  IONTRAP_STATUS_NULL_POINTER = 1,
  IONTRAP_STATUS_INVALID_INPUT = 2,
  IONTRAP_STATUS_NUMERICAL = 3,
  IONTRAP_STATUS_NOT_CONVERGED = 4,
  IONTRAP_STATUS_BUFFER_TOO_SMALL = 5,
  IONTRAP_STATUS_PANIC = 6,
} IontrapStatus;

/**
 * Problem size for [`iontrap_trap_params_default`].
 */
typedef enum IontrapTier {
  IONTRAP_TIER_DESK = 0,
  IONTRAP_TIER_PAPER = 1,
} IontrapTier;

/**
 * Diagonalized trap.
 */
typedef struct IontrapBasis IontrapBasis;

/**
 * Sampled control field.
 */
typedef struct IontrapField IontrapField;

/**
 * Square complex gate matrix.
 */
typedef struct IontrapGate IontrapGate;

/**
 * Trap constants in atomic units.
 */
typedef struct IontrapTrapParams {
  double mass;
  double charge;
  double k;
  double k_quart;
  size_t primitive_size;
  size_t dynamical_size;
  size_t computational_size;
} IontrapTrapParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error of this thread, NUL-terminated, into `buf`.
 * `*needed` (if non-null) receives the size including the terminator.
 * Returns `IONTRAP_STATUS_BUFFER_TOO_SMALL` when `len` is insufficient.
 *
 * # Safety
 * `buf` must point to `len` writable bytes (or be null when `len` is 0).
 */
enum IontrapStatus iontrap_last_error(char *buf, size_t len, size_t *needed);

/**
 * Default trap constants for a tier.
 *
 * # Safety
 * `params` must be a valid pointer.
 */
enum IontrapStatus iontrap_trap_params_default(enum IontrapTier tier,
                                               struct IontrapTrapParams *params);

/**
 * Diagonalize the trap Hamiltonian.
 *
 * # Safety
 * `params` and `basis` must be valid pointers.
 */
enum IontrapStatus iontrap_basis_solve(const struct IontrapTrapParams *params,
                                       struct IontrapBasis **basis);

/**
 * Number of retained eigenstates D.
 *
 * # Safety
 * `basis` must be a live handle.
 */
enum IontrapStatus iontrap_basis_dim(const struct IontrapBasis *basis, size_t *dim);

/**
 * Eigenenergies (hartree), D values.
 *
 * # Safety
 * `basis` must be a live handle and `buf` hold `len` doubles.
 */
enum IontrapStatus iontrap_basis_energies(const struct IontrapBasis *basis,
                                          double *buf,
                                          size_t len);

/**
 * Dipole matrix q<j|z|k> (a.u.), D*D values, row-major.
 *
 * # Safety
 * `basis` must be a live handle and `buf` hold `len` doubles.
 */
enum IontrapStatus iontrap_basis_dipole(const struct IontrapBasis *basis, double *buf, size_t len);

/**
 * Mean heating time (seconds) for heating strength `kappa` (a.u.).
 *
 * # Safety
 * `basis` must be a live handle and `seconds` valid.
 */
enum IontrapStatus iontrap_heating_time(const struct IontrapBasis *basis,
                                        double kappa,
                                        double *seconds);

/**
 * # Safety
 * `basis` must be null or a handle from [`iontrap_basis_solve`], freed once.
 */
void iontrap_basis_free(struct IontrapBasis *basis);

/**
 * Split-operator gate for a particle of mass `mass` in `m omega^2 x^2 / 2`
 * on `n` points of `[x_min, x_max]`, advanced by `delta_t` in `substeps`.
 *
 * # Safety
 * `gate` must be a valid pointer.
 */
enum IontrapStatus iontrap_gate_split_operator(size_t n,
                                               double x_min,
                                               double x_max,
                                               double mass,
                                               double omega,
                                               double delta_t,
                                               size_t substeps,
                                               struct IontrapGate **gate);

/**
 * Gate dimension N.
 *
 * # Safety
 * `gate` must be a live handle.
 */
enum IontrapStatus iontrap_gate_dim(const struct IontrapGate *gate, size_t *dim);

/**
 * Real and imaginary parts, N*N values each, row-major.
 *
 * # Safety
 * `gate` must be a live handle; `re` and `im` hold `len` doubles each.
 */
enum IontrapStatus iontrap_gate_entries(const struct IontrapGate *gate,
                                        double *re,
                                        double *im,
                                        size_t len);

/**
 * |Tr(target^+ realized)|^2 / N^2.
 *
 * # Safety
 * Both handles must be live and `value` valid.
 */
enum IontrapStatus iontrap_gate_fidelity(const struct IontrapGate *target,
                                         const struct IontrapGate *realized,
                                         double *value);

/**
 * # Safety
 * `gate` must be null or a live gate handle, freed once.
 */
void iontrap_gate_free(struct IontrapGate *gate);

/**
 * Field from `n_samples` values E(i dt), i = 0..n_samples-1 (a.u.).
 *
 * # Safety
 * `samples` must hold `n_samples` doubles; `field` must be valid.
 */
enum IontrapStatus iontrap_field_new(const double *samples,
                                     size_t n_samples,
                                     double dt,
                                     struct IontrapField **field);

/**
 * Deterministic guess: sine-shaped sum over the register's transition lines.
 *
 * # Safety
 * `basis` must be a live handle and `field` valid.
 */
enum IontrapStatus iontrap_field_guess(const struct IontrapBasis *basis,
                                       double t_pulse,
                                       double dt,
                                       struct IontrapField **field);

/**
 * Number of samples (time steps + 1).
 *
 * # Safety
 * `field` must be a live handle.
 */
enum IontrapStatus iontrap_field_len(const struct IontrapField *field, size_t *len);

/**
 * Copy the samples (a.u.).
 *
 * # Safety
 * `field` must be a live handle and `buf` hold `len` doubles.
 */
enum IontrapStatus iontrap_field_samples(const struct IontrapField *field, double *buf, size_t len);

/**
 * # Safety
 * `field` must be null or a live field handle, freed once.
 */
void iontrap_field_free(struct IontrapField *field);

/**
 * Register block (first `n` states) of the interaction-picture propagator
 * driven by `field`.
 *
 * # Safety
 * Handles must be live and `gate` valid.
 */
enum IontrapStatus iontrap_evolution_operator(const struct IontrapField *field,
                                              const struct IontrapBasis *basis,
                                              size_t n,
                                              struct IontrapGate **gate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IONTRAP_H */
