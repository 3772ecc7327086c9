#ifndef PDTN_H
#define PDTN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum PdtnStatus {
  PDTN_STATUS_OK = 0,
  PDTN_STATUS_NULL_POINTER = 1,
  PDTN_STATUS_INVALID_ARGUMENT = 2,
  PDTN_STATUS_LENGTH_MISMATCH = 3,
  PDTN_STATUS_SUPPORT_VIOLATION = 4,
  PDTN_STATUS_SOLVER_FAILURE = 5,
  PDTN_STATUS_PANIC = 6,
} PdtnStatus;

// Opaque grid handle.
typedef struct PdtnGrid PdtnGrid;

// Opaque arc handle.
typedef struct PdtnMask PdtnMask;

// Opaque potential handle; owns a copy of its grid.
typedef struct PdtnPotential PdtnPotential;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Writes the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes). Returns the full message length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t pdtn_last_error_message(char *buf, uintptr_t len);

// Creates a grid with `n` cells per side (`n >= 4`).
//
// # Safety
// `out` must be a valid pointer.
enum PdtnStatus pdtn_grid_new(uintptr_t n, struct PdtnGrid **out);

// # Safety
// `grid` must come from [`pdtn_grid_new`] or be null.
void pdtn_grid_free(struct PdtnGrid *grid);

// Number of boundary nodes, `4n`; 0 for a null handle.
//
// # Safety
// `grid` must be a live handle or null.
uintptr_t pdtn_grid_boundary_count(const struct PdtnGrid *grid);

// Number of nodes, `(n+1)²`; 0 for a null handle.
//
// # Safety
// `grid` must be a live handle or null.
uintptr_t pdtn_grid_node_count(const struct PdtnGrid *grid);

// Creates the arc `[s0, s1)` (arclength modulo 4) on `grid`.
//
// # Safety
// `grid` must be a live handle and `out` a valid pointer.
enum PdtnStatus pdtn_mask_new(const struct PdtnGrid *grid,
                              double s0,
                              double s1,
                              struct PdtnMask **out);

// # Safety
// `mask` must come from [`pdtn_mask_new`] or be null.
void pdtn_mask_free(struct PdtnMask *mask);

// Creates a zero potential with coefficients `V_2..V_kmax` on `grid`.
//
// # Safety
// `grid` must be a live handle and `out` a valid pointer.
enum PdtnStatus pdtn_potential_new(const struct PdtnGrid *grid,
                                   uintptr_t kmax,
                                   struct PdtnPotential **out);

// Sets `V_k` from `len = (n+1)²` node values.
//
// # Safety
// `potential` must be a live handle; `values` must point to `len` doubles.
enum PdtnStatus pdtn_potential_set_coefficient(struct PdtnPotential *potential,
                                               uintptr_t k,
                                               const double *values,
                                               uintptr_t len);

// # Safety
// `potential` must come from [`pdtn_potential_new`] or be null.
void pdtn_potential_free(struct PdtnPotential *potential);

// Applies the partial DtN map: Dirichlet data `f` (zero off the arc) to the
// outward normal derivative on the arc, written into `out` (zero off the arc).
// Both buffers hold `len = 4n` values. Uses the default solver settings.
//
// # Safety
// Handles must be live; `f` and `out` must point to `len` doubles.
enum PdtnStatus pdtn_dtn_apply(const struct PdtnPotential *potential,
                               const struct PdtnMask *mask,
                               const double *f,
                               double *out,
                               uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDTN_H */
