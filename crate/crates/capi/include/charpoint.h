/* C interface of the charpoint library. */

#ifndef CHARPOINT_H
#define CHARPOINT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum CpStatus {
  CP_OK = 0,
  /**
   * A required pointer argument was null.
   */
  CP_NULL_ARGUMENT = 1,
  /**
   * The surface text did not parse.
   */
  CP_PARSE_ERROR = 2,
  /**
   * Arguments outside their domain (window, radii, enums).
   */
  CP_INVALID_ARGUMENT = 3,
  /**
   * The computation itself failed; see `cp_last_error`.
   */
  CP_NUMERIC_ERROR = 4,
} CpStatus;

/**
 * Opaque surface handle: expression, window and frame.
 */
typedef struct CpSurface CpSurface;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread. Valid until the
 * next failing call on the same thread; never null.
 */
const char *cp_last_error(void);

/**
 * Library version as a static string; do not free.
 */
const char *cp_version(void);

/**
 * Release a string returned through an out-parameter.
 *
 * # Safety
 * `s` must come from this library and must not be used afterwards.
 */
void cp_string_free(char *s);

/**
 * Parse a surface `z = g(x, y)` over the window `[x0,x1] x [y0,y1]` in
 * the Heisenberg frame. Returns null on failure (see `cp_last_error`).
 *
 * # Safety
 * `text` must be a valid NUL-terminated UTF-8 string.
 */
struct CpSurface *cp_surface_new(const char *text, double x0, double x1, double y0, double y1);

/**
 * Release a surface handle.
 *
 * # Safety
 * `s` must come from `cp_surface_new` and must not be used afterwards.
 */
void cp_surface_free(struct CpSurface *s);

/**
 * Horizontal mean curvature of the graph at `(x, y)`.
 *
 * # Safety
 * `s` and `out` must be valid pointers.
 */
enum CpStatus cp_mean_curvature(const struct CpSurface *s, double x, double y, double *out);

/**
 * Locate and classify characteristic points; writes a JSON report under
 * the `charpoint-lab/1` schema to `*out_json`.
 *
 * # Safety
 * `s` and `out_json` must be valid pointers.
 */
enum CpStatus cp_analyze_json(const struct CpSurface *s, uint32_t grid, char **out_json);

/**
 * Dyadic integrability scan around an explicit center; writes the scan
 * record as JSON to `*out_json`.
 *
 * `quantity`: 0 = 1/W, 1 = |H|, 2 = H. `measure`: 0 = Riemannian,
 * 1 = sub-Riemannian.
 *
 * # Safety
 * `s` and `out_json` must be valid pointers.
 */
enum CpStatus cp_scan_json(const struct CpSurface *s,
                           double center_x,
                           double center_y,
                           uint32_t quantity,
                           uint32_t measure,
                           double eps_min,
                           double eps_max,
                           double tol,
                           char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHARPOINT_H */
