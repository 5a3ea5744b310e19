#ifndef ELL_VOLTERRA_H
#define ELL_VOLTERRA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum EvStatus {
  EV_STATUS_OK = 0,
  EV_STATUS_NULL_POINTER = 1,
  EV_STATUS_INVALID_OPERATOR = 2,
  EV_STATUS_DIMENSION_MISMATCH = 3,
  EV_STATUS_NOT_ON_SIMPLEX = 4,
  EV_STATUS_INVALID_ARGUMENT = 5,
  EV_STATUS_PARAM_OUT_OF_RANGE = 6,
  EV_STATUS_OVERFLOW = 7,
  EV_STATUS_SIZE_GUARD = 8,
  EV_STATUS_UTF8 = 9,
  EV_STATUS_PANIC = 10,
} EvStatus;

/*
 Which coordinates a Jacobian is taken in.
 */
typedef enum EvChart {
  /*
   `m x m`, all coordinates.
   */
  EV_CHART_FULL = 0,
  /*
   `(m-1) x (m-1)`, last coordinate eliminated.
   */
  EV_CHART_REDUCED = 1,
} EvChart;

/*
 Opaque operator handle.
 */
typedef struct EvOperator EvOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failure on this thread; empty after a
 success. Owned by the library and valid until the next `ev_*` call.
 */
const char *ev_last_error(void);

/*
 Parses and validates operator JSON (`{"m": .., "P": [[[..]]]}`).

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum EvStatus ev_operator_from_json(const char *json, struct EvOperator **out);

/*
 Builds an operator from `m^3` entries.

 # Safety
 `entries` must point to `m * m * m` doubles; `out` must be writable.
 */
enum EvStatus ev_operator_from_entries(size_t m, const double *entries, struct EvOperator **out);

/*
 Releases a handle. NULL is ignored.

 # Safety
 `op` must come from an `ev_*` constructor and not be used afterwards.
 */
void ev_operator_free(struct EvOperator *op);

/*
 Number of species, or 0 for a NULL handle.

 # Safety
 `op` must be NULL or a live handle.
 */
size_t ev_operator_dimension(const struct EvOperator *op);

/*
 Operator JSON with sorted keys.

 # Safety
 `op` must be a live handle; `out` must be writable.
 */
enum EvStatus ev_operator_to_json(const struct EvOperator *op, char **out);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must come from this library and not be used afterwards.
 */
void ev_string_free(char *s);

/*
 Writes `V(x)` to `out`; both arrays have `len == m` entries.

 # Safety
 `x` and `out` must point to `len` doubles.
 */
enum EvStatus ev_operator_apply(const struct EvOperator *op,
                                const double *x,
                                size_t len,
                                double *out);

/*
 Writes `x^(0), ..., x^(n)` row by row: `out` holds `(n + 1) * len`
 doubles.

 # Safety
 `x0` must point to `len` doubles and `out` to `(n + 1) * len`.
 */
enum EvStatus ev_operator_orbit(const struct EvOperator *op,
                                const double *x0,
                                size_t len,
                                size_t n,
                                double *out);

/*
 Jacobian at `x` in row-major order: `m * m` doubles for
 [`EvChart::Full`], `(m - 1) * (m - 1)` for [`EvChart::Reduced`].
 `x` need not lie on the simplex.

 # Safety
 `x` must point to `len` doubles and `out` to the size above.
 */
enum EvStatus ev_operator_jacobian(const struct EvOperator *op,
                                   const double *x,
                                   size_t len,
                                   enum EvChart chart,
                                   double *out);

/*
 Largest `ell` such that the Volterra condition holds on `1..=ell`.

 # Safety
 `op` must be a live handle; `ell` must be writable.
 */
enum EvStatus ev_operator_detect_ell(const struct EvOperator *op, size_t *ell);

/*
 Classification report as JSON.

 # Safety
 `op` must be a live handle; `out` must be writable.
 */
enum EvStatus ev_operator_classify_json(const struct EvOperator *op, char **out);

/*
 Multistart fixed-point search from a barycentric grid with `grid` points
 per edge, as JSON.

 # Safety
 `op` must be a live handle; `out` must be writable.
 */
enum EvStatus ev_operator_fixed_points_json(const struct EvOperator *op, size_t grid, char **out);

/*
 Number of 0/1 operators satisfying the Volterra condition on `1..=ell`.
 Fails with [`EvStatus::Overflow`] past 64 bits.

 # Safety
 `out` must be writable.
 */
enum EvStatus ev_extremal_count(size_t m, size_t ell, uint64_t *out);

/*
 Number of 0/1 operators without any Volterra condition.

 # Safety
 `out` must be writable.
 */
enum EvStatus ev_extremal_count_all(size_t m, uint64_t *out);

/*
 Two-species operator with `P[1][1][1] = a`, `P[1][2][1] = c`.

 # Safety
 `out` must be writable.
 */
enum EvStatus ev_m2_operator(double a, double c, struct EvOperator **out);

/*
 Symmetric three-species 2-Volterra operator.

 # Safety
 `out` must be writable.
 */
enum EvStatus ev_m3_operator(double a, double b, double c, struct EvOperator **out);

/*
 Closed-form analysis of the symmetric three-species family, as JSON.

 # Safety
 `out` must be writable.
 */
enum EvStatus ev_m3_analyze_json(double a, double b, double c, double a2b_tol, char **out);

/*
 Operator realizing vertex cycles. `vertices` lists all cycles back to
 back (1-based labels, each above `ell`); `lengths[t]` is the length of
 cycle `t`.

 # Safety
 `lengths` must point to `n_cycles` entries and `vertices` to their sum.
 */
enum EvStatus ev_cycle_family(size_t m,
                              size_t ell,
                              const size_t *vertices,
                              const size_t *lengths,
                              size_t n_cycles,
                              struct EvOperator **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELL_VOLTERRA_H */
