#ifndef KLINES_DENOISE_H
#define KLINES_DENOISE_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible entry point.
 */
typedef enum KdStatus {
  KD_STATUS_OK = 0,
  KD_STATUS_NULL_POINTER = 1,
  KD_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed or unsupported image data.
   */
  KD_STATUS_FORMAT = 3,
  KD_STATUS_DIMENSION = 4,
  KD_STATUS_IO = 5,
  KD_STATUS_JSON = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  KD_STATUS_PANIC = 7,
} KdStatus;

/**
 * Opaque trained dictionary.
 */
typedef struct KdDictionary KdDictionary;

/**
 * Opaque grayscale image.
 */
typedef struct KdImage KdImage;

/**
 * Byte buffer owned by the library.
 */
typedef struct KdBuffer {
  uint8_t *data;
  size_t len;
} KdBuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *kd_last_error_message(void);

/**
 * Creates an image from `width * height` row-major samples.
 *
 * # Safety
 * `samples` must point to `width * height` readable doubles; `out` must be writable.
 */
enum KdStatus kd_image_new(size_t width,
                           size_t height,
                           const double *samples,
                           struct KdImage **out);

/**
 * Decodes a P5 or P2 PGM held in memory.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes; `out` must be writable.
 */
enum KdStatus kd_image_read_pgm(const uint8_t *bytes, size_t len, struct KdImage **out);

/**
 * Encodes as binary P5; release the buffer with [`kd_buffer_free`].
 *
 * # Safety
 * `img` must be a live handle; `out` must be writable.
 */
enum KdStatus kd_image_write_pgm(const struct KdImage *img, struct KdBuffer *out);

/**
 * # Safety
 * `img` must be a live handle or null.
 */
size_t kd_image_width(const struct KdImage *img);

/**
 * # Safety
 * `img` must be a live handle or null.
 */
size_t kd_image_height(const struct KdImage *img);

/**
 * Borrows the row-major samples; valid while `img` is alive.
 *
 * # Safety
 * `img` must be a live handle; `data` and `len` must be writable.
 */
enum KdStatus kd_image_samples(const struct KdImage *img, const double **data, size_t *len);

/**
 * # Safety
 * `img` must come from this library and not be used afterwards. Null is ignored.
 */
void kd_image_free(struct KdImage *img);

/**
 * Adds seeded Gaussian noise; the result is not clamped.
 *
 * # Safety
 * `img` must be a live handle; `out` must be writable.
 */
enum KdStatus kd_add_awgn(const struct KdImage *img,
                          double sigma,
                          uint64_t seed,
                          struct KdImage **out);

/**
 * PSNR in dB; `INFINITY` for identical images.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
enum KdStatus kd_psnr(const struct KdImage *a, const struct KdImage *b, double *out);

/**
 * Trains on `noisy` and denoises it. `config_json` and `clean` may be null;
 * when `report_json` is non-null it receives the JSON report (free with
 * [`kd_string_free`]).
 *
 * # Safety
 * Pointers must be live handles, valid NUL-terminated strings, or null where allowed.
 */
enum KdStatus kd_denoise(const struct KdImage *noisy,
                         const char *config_json,
                         const struct KdImage *clean,
                         struct KdImage **out,
                         char **report_json);

/**
 * Learns a dictionary from `noisy`.
 *
 * # Safety
 * `noisy` must be a live handle, `config_json` a valid string or null, `out` writable.
 */
enum KdStatus kd_train(const struct KdImage *noisy,
                       const char *config_json,
                       struct KdDictionary **out);

/**
 * Denoises with a previously trained dictionary.
 *
 * # Safety
 * As [`kd_denoise`]; `dict` must be a live handle.
 */
enum KdStatus kd_denoise_with_dictionary(const struct KdImage *noisy,
                                         const struct KdDictionary *dict,
                                         const char *config_json,
                                         const struct KdImage *clean,
                                         struct KdImage **out,
                                         char **report_json);

/**
 * Parses a dictionary JSON document.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string; `out` writable.
 */
enum KdStatus kd_dictionary_from_json(const char *json, struct KdDictionary **out);

/**
 * Serializes a dictionary; free the string with [`kd_string_free`].
 *
 * # Safety
 * `dict` must be a live handle; `out` writable.
 */
enum KdStatus kd_dictionary_to_json(const struct KdDictionary *dict, char **out);

/**
 * # Safety
 * `dict` must be a live handle or null.
 */
size_t kd_dictionary_atom_count(const struct KdDictionary *dict);

/**
 * # Safety
 * `dict` must come from this library and not be used afterwards. Null is ignored.
 */
void kd_dictionary_free(struct KdDictionary *dict);

/**
 * Clustering cost of a cluster-model JSON document. `data_json` (a block
 * matrix document) may be null when the model carries eigenvalues.
 * `smooth_cutoff < 0` selects the default `sigma^2`.
 *
 * # Safety
 * Strings must be valid NUL-terminated UTF-8 (or null where allowed); outputs writable.
 */
enum KdStatus kd_clustering_cost(const char *model_json,
                                 const char *data_json,
                                 double sigma,
                                 double smooth_cutoff,
                                 double *total,
                                 double *non_smooth);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void kd_string_free(char *s);

/**
 * # Safety
 * `buf` must come from this library and not be freed twice.
 */
void kd_buffer_free(struct KdBuffer buf);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KLINES_DENOISE_H */
