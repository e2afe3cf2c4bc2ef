#ifndef FRACCONS_H
#define FRACCONS_H

#include <stddef.h>
#include <stdint.h>

// Result of every fallible call.
typedef enum FcStatus {
  FC_STATUS_OK = 0,
  FC_STATUS_NULL_POINTER = 1,
  FC_STATUS_INVALID_UTF8 = 2,
  FC_STATUS_PARAMETER = 3,
  FC_STATUS_DOMAIN = 4,
  FC_STATUS_GRID = 5,
  FC_STATUS_NUMERIC = 6,
  FC_STATUS_SINGULAR_DATA = 7,
  FC_STATUS_INADMISSIBLE = 8,
  FC_STATUS_SOLVER = 9,
  FC_STATUS_CONFIG = 10,
  FC_STATUS_IO = 11,
  FC_STATUS_OUT_OF_RANGE = 12,
  FC_STATUS_PANIC = 13,
} FcStatus;

// A space-time field on a grid.
typedef struct FcField FcField;

// Rows of a verification run.
typedef struct FcReport FcReport;

// A validated scenario configuration.
typedef struct FcScenario FcScenario;

// Summary of one report row. `convergence_ratio` is NaN when the row has no
// coarser partner.
typedef struct FcReportRow {
  size_t n_steps;
  size_t n_x;
  double linf;
  double l2;
  size_t excluded_nodes;
  double convergence_ratio;
} FcReportRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, copied like the other
// string getters; 0 when there is none.
//
// # Safety
// `buf` is null or valid for `cap` bytes.
size_t fc_last_error(char *buf, size_t cap);

// Library version as a static NUL-terminated string.
const char *fc_version(void);

// Γ(z).
//
// # Safety
// `out` is null or valid for one write.
enum FcStatus fc_gamma(double z, double *out);

// Two-parameter Mittag-Leffler function `E_{a,b}(z)`.
//
// # Safety
// `out` is null or valid for one write.
enum FcStatus fc_mittag_leffler(double a, double b, double z, double *out);

// Gauss hypergeometric function `₂F₁(a, b; c; z)`.
//
// # Safety
// `out` is null or valid for one write.
enum FcStatus fc_hyp2f1(double a, double b, double c, double z, double *out);

// Parse and validate a TOML scenario.
//
// # Safety
// `toml` is a NUL-terminated string; `out` is valid for one write.
enum FcStatus fc_scenario_parse(const char *toml, struct FcScenario **out);

// # Safety
// `sc` is null or a handle from [`fc_scenario_parse`] not yet freed.
void fc_scenario_free(struct FcScenario *sc);

// Solve (or sample the exact solution) on `n_steps` time steps.
//
// # Safety
// `sc` is a live scenario handle; `out` is valid for one write.
enum FcStatus fc_scenario_solve(const struct FcScenario *sc, size_t n_steps, struct FcField **out);

// Run the refinement study of the scenario.
//
// # Safety
// `sc` is a live scenario handle; `out` is valid for one write.
enum FcStatus fc_scenario_verify(const struct FcScenario *sc, struct FcReport **out);

// # Safety
// `f` is null or a live field handle.
void fc_field_free(struct FcField *f);

// Number of time nodes and space nodes.
//
// # Safety
// `f` is a live field handle; `n_t` and `n_x` are valid for one write.
enum FcStatus fc_field_dims(const struct FcField *f, size_t *n_t, size_t *n_x);

// Field values (weight applied), row-major by time node, into `buf` of
// `len` doubles; `len` must equal `n_t * n_x`.
//
// # Safety
// `f` is a live field handle; `buf` is valid for `len` writes.
enum FcStatus fc_field_values(const struct FcField *f, double *buf, size_t len);

// # Safety
// `r` is null or a live report handle.
void fc_report_free(struct FcReport *r);

// Number of rows; 0 for a null handle.
//
// # Safety
// `r` is null or a live report handle.
size_t fc_report_len(const struct FcReport *r);

// Number of rows whose refinement ratio missed the threshold.
//
// # Safety
// `r` is null or a live report handle.
size_t fc_report_failures(const struct FcReport *r);

// # Safety
// `r` is a live report handle; `out` is valid for one write.
enum FcStatus fc_report_row(const struct FcReport *r, size_t i, struct FcReportRow *out);

// Vector id of row `i`; returns its length, or 0 with an error recorded
// when `i` is out of range.
//
// # Safety
// `r` is a live report handle; `buf` is null or valid for `cap` bytes.
size_t fc_report_id(const struct FcReport *r, size_t i, char *buf, size_t cap);

// The report as CSV; returns the full length.
//
// # Safety
// `r` is a live report handle; `buf` is null or valid for `cap` bytes.
size_t fc_report_csv(const struct FcReport *r, char *buf, size_t cap);

// Run criterion `number` (1-12); `*passed` is set to 1 or 0.
//
// # Safety
// `passed` is valid for one write.
enum FcStatus fc_selftest(uint8_t number, int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACCONS_H */
