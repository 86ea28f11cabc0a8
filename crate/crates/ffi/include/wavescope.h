#ifndef WAVESCOPE_H
#define WAVESCOPE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum WsStatus {
  WS_STATUS_OK = 0,
  WS_STATUS_NULL_POINTER = 1,
  WS_STATUS_INVALID_ARGUMENT = 2,
  WS_STATUS_IO = 3,
  WS_STATUS_FORMAT = 4,
  WS_STATUS_DIMENSION = 5,
  WS_STATUS_CAPABILITY = 6,
  WS_STATUS_OTHER = 7,
  WS_STATUS_PANIC = 8,
} WsStatus;

/**
 * Opaque luma clip.
 */
typedef struct WsClip WsClip;

/**
 * Opaque trained detector.
 */
typedef struct WsModel WsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *ws_last_error(void);

/**
 * Load a `.y4m` or `.wvt` clip.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum WsStatus ws_clip_load(const char *path, struct WsClip **out);

/**
 * Build a clip from `frames * height * width` luma samples in [0, 1].
 *
 * # Safety
 * `data` must point to that many floats and `out` must be writable.
 */
enum WsStatus ws_clip_from_luma(size_t frames,
                                size_t height,
                                size_t width,
                                const float *data,
                                struct WsClip **out);

/**
 * Write a clip; the extension picks Y4M or `.wvt`.
 *
 * # Safety
 * `clip` must be a live handle and `path` a NUL-terminated string.
 */
enum WsStatus ws_clip_save(const struct WsClip *clip, const char *path);

/**
 * # Safety
 * `clip` must be a live handle; each out pointer may be null.
 */
enum WsStatus ws_clip_dims(const struct WsClip *clip,
                           size_t *frames,
                           size_t *height,
                           size_t *width);

/**
 * Copy the luma samples into `buf`, which must hold `frames * height * width` floats.
 *
 * # Safety
 * `clip` must be a live handle and `buf` writable for `len` floats.
 */
enum WsStatus ws_clip_copy_luma(const struct WsClip *clip, float *buf, size_t len);

/**
 * # Safety
 * `clip` must be null or a handle not yet freed.
 */
void ws_clip_free(struct WsClip *clip);

/**
 * Energies of the `(levels+1)^2` subbands of one frame, row-major into `out`.
 *
 * # Safety
 * `clip` must be a live handle and `out` writable for `len` doubles.
 */
enum WsStatus ws_band_energies(const struct WsClip *clip,
                               size_t frame,
                               uint32_t levels,
                               double *out,
                               size_t len);

/**
 * Replace the bands named by `mask` (`default`, `all`, `none` or a JSON
 * file) of every fake frame with the real frame's.
 *
 * # Safety
 * Handles must be live, `mask` NUL-terminated and `out` writable.
 */
enum WsStatus ws_waverep(const struct WsClip *fake,
                         const struct WsClip *real,
                         const char *mask,
                         uint32_t levels,
                         struct WsClip **out);

/**
 * Real clip with its diagonal mid/high bands taken from `fake`.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum WsStatus ws_attack(const struct WsClip *real,
                        const struct WsClip *fake,
                        uint32_t levels,
                        struct WsClip **out);

/**
 * Load a model JSON written by `wavescope train`.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` writable.
 */
enum WsStatus ws_model_load(const char *path, struct WsModel **out);

/**
 * Mean per-frame logit of `clip` and its probability of being fake.
 * The clip must already be cropped to a multiple of `2^levels`.
 *
 * # Safety
 * Handles must be live; `logit` and `prob` may be null.
 */
enum WsStatus ws_model_score(const struct WsModel *model,
                             const struct WsClip *clip,
                             double *logit,
                             double *prob);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void ws_model_free(struct WsModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAVESCOPE_H */
