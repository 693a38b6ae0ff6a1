#ifndef AGESTAND_H
#define AGESTAND_H

/* Generated by cbindgen from agestand-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum AgestandStatus {
  AGESTAND_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  AGESTAND_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  AGESTAND_STATUS_INVALID_UTF8 = 2,
  /**
   * The input failed parsing or validation; see agestand_last_error.
   */
  AGESTAND_STATUS_PARSE_ERROR = 3,
  /**
   * A domain error (unknown year, band mismatch, ...); see
   * agestand_last_error.
   */
  AGESTAND_STATUS_DOMAIN_ERROR = 4,
  /**
   * The caller's buffer is too small; the required length was written
   * to the length output.
   */
  AGESTAND_STATUS_BUFFER_TOO_SMALL = 5,
} AgestandStatus;

/**
 * Sex selector for stratum addressing.
 */
typedef enum AgestandSex {
  AGESTAND_SEX_FEMALE = 0,
  AGESTAND_SEX_MALE = 1,
  AGESTAND_SEX_ALL = 2,
} AgestandSex;

/**
 * Opaque handle to a parsed counts table.
 */
typedef struct AgestandTable AgestandTable;

/**
 * Decomposition of a crude change into its composition-driven part.
 */
typedef struct AgestandDecomposition {
  double crude_change;
  double composition_change;
  /**
   * composition_change / crude_change; meaningful only when
   * `share_defined` is nonzero (it is NaN otherwise).
   */
  double share;
  uint8_t share_defined;
} AgestandDecomposition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the library, as a static NUL-terminated string.
 */
const char *agestand_version(void);

/**
 * Message for the most recent failure on this thread, as a freshly
 * allocated string. Release it with agestand_string_free. Never null.
 */
char *agestand_last_error(void);

/**
 * Release a string returned by agestand_last_error.
 *
 * # Safety
 * `s` must be a pointer returned by this library and not yet freed.
 */
void agestand_string_free(char *s);

/**
 * Parse the native CSV schema (year,age,sex,region,deaths,population).
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be a valid
 * pointer. On `AGESTAND_STATUS_OK` the caller owns the handle written to
 * `*out` and must release it with agestand_table_free.
 */
enum AgestandStatus agestand_table_from_csv(const uint8_t *data,
                                            size_t len,
                                            struct AgestandTable **out);

/**
 * Parse a tab-delimited public-database export.
 *
 * # Safety
 * Same contract as agestand_table_from_csv.
 */
enum AgestandStatus agestand_table_from_wonder(const uint8_t *data,
                                               size_t len,
                                               struct AgestandTable **out);

/**
 * Release a table handle. A null handle is a no-op.
 *
 * # Safety
 * `table` must be a handle from a parse function, not yet freed.
 */
void agestand_table_free(struct AgestandTable *table);

/**
 * First calendar year of the table; `*out` is untouched on error.
 *
 * # Safety
 * `table` must be a live handle; `out` must be valid.
 */
enum AgestandStatus agestand_table_first_year(const struct AgestandTable *table, int32_t *out);

/**
 * Last calendar year of the table.
 *
 * # Safety
 * `table` must be a live handle; `out` must be valid.
 */
enum AgestandStatus agestand_table_last_year(const struct AgestandTable *table, int32_t *out);

/**
 * Number of calendar years in the table.
 *
 * # Safety
 * `table` must be a live handle; `out` must be valid.
 */
enum AgestandStatus agestand_table_year_count(const struct AgestandTable *table, size_t *out);

/**
 * Age band covered by the table.
 *
 * # Safety
 * `table` must be a live handle; `lo` and `hi` must be valid.
 */
enum AgestandStatus agestand_table_band(const struct AgestandTable *table,
                                        uint32_t *lo,
                                        uint32_t *hi);

/**
 * Crude rate (total deaths over total population) for one year, as a
 * fraction.
 *
 * # Safety
 * `table` must be a live handle; `region` must be null or a
 * NUL-terminated string; `out` must be valid.
 */
enum AgestandStatus agestand_crude_rate(const struct AgestandTable *table,
                                        int32_t year,
                                        uint32_t band_lo,
                                        uint32_t band_hi,
                                        enum AgestandSex sex,
                                        const char *region,
                                        double *out);

/**
 * Population-weighted mean age for one year, in years.
 *
 * # Safety
 * Same contract as agestand_crude_rate.
 */
enum AgestandStatus agestand_mean_age(const struct AgestandTable *table,
                                      int32_t year,
                                      uint32_t band_lo,
                                      uint32_t band_hi,
                                      enum AgestandSex sex,
                                      const char *region,
                                      double *out);

/**
 * Directly standardized series under a standard named by token
 * (`uniform`, `first`, `last`, or `year:YYYY`).
 *
 * Writes up to `capacity` (year, rate) pairs in year order and stores the
 * series length in `*written`. Call with `capacity` 0 to query the length
 * (returns `AGESTAND_STATUS_BUFFER_TOO_SMALL`).
 *
 * # Safety
 * `table` must be a live handle; `standard` must be a NUL-terminated
 * string; `region` null or NUL-terminated; the output arrays must hold
 * `capacity` elements; `written` must be valid.
 */
enum AgestandStatus agestand_adjusted_series(const struct AgestandTable *table,
                                             uint32_t band_lo,
                                             uint32_t band_hi,
                                             enum AgestandSex sex,
                                             const char *region,
                                             const char *standard,
                                             int32_t *years_out,
                                             double *rates_out,
                                             size_t capacity,
                                             size_t *written);

/**
 * Composition-counterfactual series with rates frozen at `ref_year`.
 * Buffer contract as in agestand_adjusted_series.
 *
 * # Safety
 * Same contract as agestand_adjusted_series.
 */
enum AgestandStatus agestand_counterfactual_series(const struct AgestandTable *table,
                                                   uint32_t band_lo,
                                                   uint32_t band_hi,
                                                   enum AgestandSex sex,
                                                   const char *region,
                                                   int32_t ref_year,
                                                   int32_t *years_out,
                                                   double *rates_out,
                                                   size_t capacity,
                                                   size_t *written);

/**
 * Decompose the crude change over (t0, t1) with rates frozen at
 * `ref_year`.
 *
 * # Safety
 * `table` must be a live handle; `region` null or NUL-terminated; `out`
 * must be valid.
 */
enum AgestandStatus agestand_decompose(const struct AgestandTable *table,
                                       uint32_t band_lo,
                                       uint32_t band_hi,
                                       enum AgestandSex sex,
                                       const char *region,
                                       int32_t t0,
                                       int32_t t1,
                                       int32_t ref_year,
                                       struct AgestandDecomposition *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AGESTAND_H */
