#ifndef MOMENTUM_ENTANGLEMENT_H
#define MOMENTUM_ENTANGLEMENT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Which default grid [`me_grid_sample`] builds.
typedef enum MeGridKind {
  ME_GRID_KIND_DETECTION = 0,
  ME_GRID_KIND_SCHMIDT = 1,
} MeGridKind;

// Status codes; the nonzero values of the first four match the CLI exit codes.
typedef enum MeStatus {
  ME_STATUS_OK = 0,
  ME_STATUS_IO = 1,
  ME_STATUS_CONFIG = 2,
  ME_STATUS_NUMERICAL = 3,
  ME_STATUS_BUDGET = 4,
  ME_STATUS_NULL_POINTER = 5,
  ME_STATUS_PANIC = 6,
} MeStatus;

// Opaque sampled joint amplitude.
typedef struct MeGrid MeGrid;

// Opaque Schmidt decomposition.
typedef struct MeSchmidt MeSchmidt;

// Mirrors `AtomParams`; rates in units of `gamma_a`.
typedef struct MeAtomParams {
  double gamma_a;
  double gamma_b;
  double omega_12;
  double epsilon;
  double coherence_r;
  double coherence_theta;
  double eta;
} MeAtomParams;

typedef struct MeReport {
  double r;
  double k;
  double pe;
  double var_single;
  double var_coin;
  double dk0;
  // 1 when the detection grid resolves the ridge.
  int32_t detection_adequate;
  // 1 when the Schmidt grid resolves the ridge.
  int32_t schmidt_adequate;
} MeReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length, 0 if none.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t me_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *me_version(void);

// Fills `out` with the symmetric dark state of splitting `delta`.
//
// # Safety
// `out` must be null or valid for writes.
enum MeStatus me_params_dark_state(double delta, double eta, struct MeAtomParams *out_params);

// Checks `params`; returns the error class on violation.
//
// # Safety
// `params` must be null or point to a valid struct.
enum MeStatus me_params_validate(const struct MeAtomParams *params);

// Centre and half-width of the narrow ridge in `dq + dk`.
//
// # Safety
// Pointers must be null or valid.
enum MeStatus me_ridge(const struct MeAtomParams *params, double *center, double *half_width);

// Unnormalized joint amplitude at one point.
//
// # Safety
// Pointers must be null or valid.
enum MeStatus me_amplitude_at(const struct MeAtomParams *params,
                              double dq,
                              double dk,
                              double *re,
                              double *im);

// Samples the default grid of `kind` at density `scale`. On success the
// caller owns `*grid` and releases it with [`me_grid_free`].
//
// # Safety
// Pointers must be null or valid.
enum MeStatus me_grid_sample(const struct MeAtomParams *params,
                             enum MeGridKind kind,
                             double scale,
                             struct MeGrid **grid);

// # Safety
// `grid` must be null or a handle from [`me_grid_sample`] not yet freed.
void me_grid_free(struct MeGrid *grid);

// # Safety
// Pointers must be null or valid.
enum MeStatus me_grid_dims(const struct MeGrid *grid, size_t *rows, size_t *cols);

// Normalized sample `(i, j)` and its coordinates.
//
// # Safety
// Pointers must be null or valid; any of the outputs may be null.
enum MeStatus me_grid_value(const struct MeGrid *grid,
                            size_t i,
                            size_t j,
                            double *dq,
                            double *dk,
                            double *re,
                            double *im);

// Fedorov ratio conditioned at the peak of the photon marginal.
//
// # Safety
// Pointers must be null or valid.
enum MeStatus me_grid_r_ratio(const struct MeGrid *grid, double *r);

// Schmidt decomposition keeping modes down to relative weight `tol`.
//
// # Safety
// Pointers must be null or valid.
enum MeStatus me_schmidt_decompose(const struct MeGrid *grid,
                                   double tol,
                                   struct MeSchmidt **result);

// # Safety
// `result` must be null or a handle from [`me_schmidt_decompose`] not yet freed.
void me_schmidt_free(struct MeSchmidt *result);

// # Safety
// Pointers must be null or valid.
enum MeStatus me_schmidt_number(const struct MeSchmidt *result, double *k);

// Copies up to `len` normalized eigenvalues, largest first, and stores the
// number available in `available`.
//
// # Safety
// `buf` must be null or point to `len` writable doubles.
enum MeStatus me_schmidt_eigenvalues(const struct MeSchmidt *result,
                                     double *buf,
                                     size_t len,
                                     size_t *available);

// Full report at grid density `scale`.
//
// # Safety
// Pointers must be null or valid.
enum MeStatus me_analyze(const struct MeAtomParams *params, double scale, struct MeReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOMENTUM_ENTANGLEMENT_H */
