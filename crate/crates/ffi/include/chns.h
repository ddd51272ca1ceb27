#ifndef CHNS_H
#define CHNS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ChnsStatus {
  ChnsStatus_Ok = 0,
  ChnsStatus_NullPointer = 1,
  ChnsStatus_InvalidArgument = 2,
  ChnsStatus_OutOfBounds = 3,
  ChnsStatus_NoConvergence = 4,
  ChnsStatus_InvariantBreach = 5,
  ChnsStatus_Io = 6,
  ChnsStatus_Panic = 7,
} ChnsStatus;

typedef enum ChnsBoundary {
  /**
   * No-flux scalars, free-slip walls.
   */
  ChnsBoundary_Physical = 0,
  ChnsBoundary_Periodic = 1,
} ChnsBoundary;

/**
 * Opaque simulation handle.
 */
typedef struct ChnsSim ChnsSim;

/**
 * Physical and numerical parameters. Solver tolerances keep their defaults.
 */
typedef struct ChnsParams {
  size_t n;
  enum ChnsBoundary boundary;
  double eps;
  double theta0;
  double gamma;
  double nu;
  double tau;
} ChnsParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *chns_last_error(void);

/**
 * Writes the default parameters into `out`.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `ChnsParams`.
 */
enum ChnsStatus chns_params_default(struct ChnsParams *out);

/**
 * Creates a simulation from a seeded random phase `beta0 + amplitude*U(-1,1)`
 * and zero velocity.
 *
 * # Safety
 * `params` must point to a valid `ChnsParams`; `out` to writable storage
 * for one pointer.
 */
enum ChnsStatus chns_sim_new(const struct ChnsParams *params,
                             double beta0,
                             double amplitude,
                             uint64_t seed,
                             struct ChnsSim **out);

/**
 * Creates a simulation from `n*n` cell values of the phase, `i` fastest.
 *
 * # Safety
 * `phi` must point to `len` readable doubles.
 */
enum ChnsStatus chns_sim_new_from_phase(const struct ChnsParams *params,
                                        const double *phi,
                                        size_t len,
                                        struct ChnsSim **out);

/**
 * Releases a simulation. Null is ignored.
 *
 * # Safety
 * `sim` must come from `chns_sim_new*` and not be used afterwards.
 */
void chns_sim_free(struct ChnsSim *sim);

/**
 * Advances `steps` time steps. On failure the state is left at the last
 * accepted step.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum ChnsStatus chns_sim_step(struct ChnsSim *sim, size_t steps);

/**
 * Grid size `n`, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t chns_sim_n(const struct ChnsSim *sim);

/**
 * Simulated time, or NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
double chns_sim_time(const struct ChnsSim *sim);

/**
 * Copies the phase at cell centres into `buf` (`n*n`, `i` fastest).
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum ChnsStatus chns_sim_get_phase(const struct ChnsSim *sim, double *buf, size_t len);

/**
 * Copies the pressure at cell centres into `buf` (`n*n`, `i` fastest).
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum ChnsStatus chns_sim_get_pressure(const struct ChnsSim *sim, double *buf, size_t len);

/**
 * Copies the velocity averaged to cell centres into `ux` and `uy`
 * (`n*n` each, `i` fastest).
 *
 * # Safety
 * `ux` and `uy` must each point to `len` writable doubles.
 */
enum ChnsStatus chns_sim_get_velocity(const struct ChnsSim *sim,
                                      double *ux,
                                      double *uy,
                                      size_t len);

/**
 * Total discrete energy of the current state.
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
enum ChnsStatus chns_sim_energy(const struct ChnsSim *sim, double *out);

/**
 * Mean of the phase over the cells.
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
enum ChnsStatus chns_sim_mass(const struct ChnsSim *sim, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHNS_H */
