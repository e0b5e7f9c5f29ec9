#ifndef CBB_H
#define CBB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum CbbStatus {
  CBB_STATUS_OK = 0,
  CBB_STATUS_NULL_POINTER = 1,
  CBB_STATUS_INVALID_ARGUMENT = 2,
  CBB_STATUS_GENERATION_FAILED = 3,
  CBB_STATUS_NO_SUITABLE_SITE = 4,
  CBB_STATUS_IO = 5,
  CBB_STATUS_MALFORMED_INPUT = 6,
  CBB_STATUS_DOMAIN = 7,
  CBB_STATUS_BUFFER_TOO_SMALL = 8,
  CBB_STATUS_PANIC = 9,
} CbbStatus;

typedef enum CbbEditCondition {
  CBB_EDIT_CONDITION_CONCAVE = 0,
  CBB_EDIT_CONDITION_NOFILL = 1,
  CBB_EDIT_CONDITION_CONVEX = 2,
} CbbEditCondition;

/**
 * Binary mask, row-major, one byte per pixel.
 */
typedef struct CbbMask CbbMask;

/**
 * Simple counter-clockwise polygon in unit scene coordinates.
 */
typedef struct CbbPolygon CbbPolygon;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Why the most recent status-returning call on this thread failed, or NULL
 * if it succeeded. Valid until the next such call on the same thread.
 */
const char *cbb_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cbb_version(void);

/**
 * Generates a random simple polygon with exactly `n_concavities` reflex vertices.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum CbbStatus cbb_polygon_generate(uint32_t n_vertices,
                                    uint32_t n_concavities,
                                    double irregularity,
                                    double spikiness,
                                    uint64_t seed,
                                    struct CbbPolygon **out);

/**
 * Builds a polygon from `n` interleaved `x, y` pairs. Clockwise input is reversed.
 *
 * # Safety
 * `xy` must point to `2 * n` readable doubles; `out` must be writable.
 */
enum CbbStatus cbb_polygon_from_xy(const double *xy, size_t n, struct CbbPolygon **out);

/**
 * # Safety
 * `poly` must be NULL or a handle from this library that was not yet freed.
 */
void cbb_polygon_free(struct CbbPolygon *poly);

/**
 * Number of vertices, 0 for NULL.
 *
 * # Safety
 * `poly` must be NULL or a live handle.
 */
size_t cbb_polygon_len(const struct CbbPolygon *poly);

/**
 * Copies vertices as interleaved `x, y` pairs into `xy`, which holds `cap` doubles.
 *
 * # Safety
 * `poly` must be a live handle and `xy` must point to `cap` writable doubles.
 */
enum CbbStatus cbb_polygon_vertices(const struct CbbPolygon *poly, double *xy, size_t cap);

/**
 * Shoelace area, NaN for NULL.
 *
 * # Safety
 * `poly` must be NULL or a live handle.
 */
double cbb_polygon_area(const struct CbbPolygon *poly);

/**
 * Number of reflex vertices, 0 for NULL.
 *
 * # Safety
 * `poly` must be NULL or a live handle.
 */
size_t cbb_polygon_reflex_count(const struct CbbPolygon *poly);

/**
 * # Safety
 * `poly` must be a live handle; `out` must be writable.
 */
enum CbbStatus cbb_polygon_convex_hull(const struct CbbPolygon *poly, struct CbbPolygon **out);

/**
 * Adds a piece of area `rel_area * area(poly)` at a site of the given kind.
 * `piece_area` may be NULL.
 *
 * # Safety
 * `poly` must be a live handle; `out` must be writable; `piece_area` NULL or writable.
 */
enum CbbStatus cbb_make_edit(const struct CbbPolygon *poly,
                             enum CbbEditCondition condition,
                             double rel_area,
                             uint64_t seed,
                             struct CbbPolygon **out,
                             double *piece_area);

/**
 * Rasterizes the polygon by pixel-center sampling onto a `width` x `height` grid.
 *
 * # Safety
 * `poly` must be a live handle; `out` must be writable.
 */
enum CbbStatus cbb_rasterize(const struct CbbPolygon *poly,
                             uint32_t width,
                             uint32_t height,
                             struct CbbMask **out);

/**
 * Builds a mask from `width * height` bytes; any nonzero byte is foreground.
 *
 * # Safety
 * `bits` must point to `width * height` readable bytes; `out` must be writable.
 */
enum CbbStatus cbb_mask_from_bytes(const uint8_t *bits,
                                   uint32_t width,
                                   uint32_t height,
                                   struct CbbMask **out);

/**
 * # Safety
 * `mask` must be NULL or a handle from this library that was not yet freed.
 */
void cbb_mask_free(struct CbbMask *mask);

/**
 * Width in pixels, 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
uint32_t cbb_mask_width(const struct CbbMask *m);

/**
 * Height in pixels, 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
uint32_t cbb_mask_height(const struct CbbMask *m);

/**
 * Foreground pixel count, 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
uint64_t cbb_mask_count(const struct CbbMask *m);

/**
 * Copies the mask as 0/1 bytes, row-major, into `dst` of `cap` bytes.
 *
 * # Safety
 * `m` must be a live handle and `dst` must point to `cap` writable bytes.
 */
enum CbbStatus cbb_mask_copy_bytes(const struct CbbMask *m, uint8_t *dst, size_t cap);

/**
 * Morphological closing with a Euclidean disk of `radius` pixels.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum CbbStatus cbb_mask_closing(const struct CbbMask *m, uint32_t radius, struct CbbMask **out);

/**
 * Reads an 8-bit mask or a 16-bit probability map (binarized at p > 0.5).
 *
 * # Safety
 * `file` must be a NUL-terminated UTF-8 path; `out` must be writable.
 */
enum CbbStatus cbb_mask_read_png(const char *file, struct CbbMask **out);

/**
 * Writes the mask as an 8-bit {0, 255} PNG.
 *
 * # Safety
 * `m` must be a live handle; `file` must be a NUL-terminated UTF-8 path.
 */
enum CbbStatus cbb_mask_write_png(const struct CbbMask *m, const char *file);

/**
 * Relative area change `(a_out - a_init) / a_seg_gt`; `CBB_STATUS_DOMAIN` when `a_seg_gt` is 0.
 *
 * # Safety
 * `out` must be writable.
 */
enum CbbStatus cbb_rac(uint64_t a_init, uint64_t a_out, uint64_t a_seg_gt, double *out);

/**
 * True when `rac` exceeds `tau_percent / 100`.
 */
bool cbb_detect(double rac, double tau_percent);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CBB_H */
