#ifndef RELWALK_H
#define RELWALK_H

#include <stddef.h>
#include <stdint.h>

/*
 Result of every fallible call.
 */
typedef enum RwStatus {
  RW_STATUS_OK = 0,
  RW_STATUS_NULL_POINTER = 1,
  RW_STATUS_INVALID_ARGUMENT = 2,
  RW_STATUS_NUMERICAL = 3,
  RW_STATUS_BUFFER_TOO_SMALL = 4,
  RW_STATUS_PANIC = 5,
} RwStatus;

/*
 Density profile from one relativistic OU run.
 */
typedef struct RwRoupRun RwRoupRun;

/*
 Walk on a periodic ring with one coin at every site.
 */
typedef struct RwWalk RwWalk;

/*
 Coin angles, as in the library.
 */
typedef struct RwCoinAngles {
  double theta;
  double xi;
  double zeta;
  double alpha;
} RwCoinAngles;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version, a static NUL-terminated string.
 */
const char *rw_version(void);

/*
 Message of the last failure on this thread, or NULL. Valid until the
 next failing call on the same thread.
 */
const char *rw_last_error_message(void);

/*
 Writes the 2×2 coin row-major into `out` (8 doubles, interleaved).

 # Safety
 `out` must point to 8 writable doubles.
 */
enum RwStatus rw_build_coin(struct RwCoinAngles angles, double *out);

/*
 New walk of `sites` sites labelled `0..sites`, all amplitude in the
 lower component at `sites/2`.

 # Safety
 `out` must be a valid pointer to a handle slot.
 */
enum RwStatus rw_walk_new(size_t sites, struct RwCoinAngles angles, struct RwWalk **out);

/*
 # Safety
 `walk` must come from [`rw_walk_new`] and not be used afterwards.
 */
void rw_walk_free(struct RwWalk *walk);

/*
 # Safety
 `walk` and `out` must be valid.
 */
enum RwStatus rw_walk_sites(const struct RwWalk *walk, size_t *out);

/*
 Replaces the amplitudes. Each array holds `2·len` doubles and `len` must
 equal the number of sites.

 # Safety
 Both arrays must hold `2·len` readable doubles.
 */
enum RwStatus rw_walk_set_state(struct RwWalk *walk,
                                const double *minus,
                                const double *plus,
                                size_t len);

/*
 Copies the amplitudes out; each array needs room for `2·sites` doubles.

 # Safety
 Both arrays must hold `2·len` writable doubles.
 */
enum RwStatus rw_walk_get_state(const struct RwWalk *walk, double *minus, double *plus, size_t len);

/*
 # Safety
 `walk` must be valid.
 */
enum RwStatus rw_walk_step(struct RwWalk *walk, size_t steps);

/*
 `Σ_m |ψ⁻_m|² + |ψ⁺_m|²`.

 # Safety
 `walk` and `out` must be valid.
 */
enum RwStatus rw_walk_probability(const struct RwWalk *walk, double *out);

/*
 Simulates to time `t` on the default domain `|X| ≤ 1.5 QT`.

 # Safety
 `out` must be a valid pointer to a handle slot.
 */
enum RwStatus rw_roup_run(double q,
                          double t,
                          size_t p_points,
                          size_t x_points,
                          struct RwRoupRun **out);

/*
 # Safety
 `run` must come from [`rw_roup_run`] and not be used afterwards.
 */
void rw_roup_free(struct RwRoupRun *run);

/*
 Number of X samples.

 # Safety
 `run` and `out` must be valid.
 */
enum RwStatus rw_roup_points(const struct RwRoupRun *run, size_t *out);

/*
 Copies `X`, `N` and `J`; any array may be NULL to skip it.

 # Safety
 Non-null arrays must hold `len` writable doubles.
 */
enum RwStatus rw_roup_density(const struct RwRoupRun *run,
                              double *x,
                              double *n,
                              double *j,
                              size_t len);

/*
 Metric `g` and `h` on the X grid, NaN where the density is below the
 floor; `valid` (optional) receives 1 where defined.

 # Safety
 Non-null arrays must hold `len` writable elements.
 */
enum RwStatus rw_roup_metric(const struct RwRoupRun *run,
                             double *g,
                             double *h,
                             uint8_t *valid,
                             size_t len);

/*
 Unnormalised short-time density at `(T, X)`.

 # Safety
 `out` must be valid.
 */
enum RwStatus rw_heuristic_density(double t, double x, double q, double *out);

/*
 Velocity `|X/T|` of the heuristic maxima; fails for `Q > √3`.

 # Safety
 `out` must be valid.
 */
enum RwStatus rw_heuristic_peak(double q, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELWALK_H */
