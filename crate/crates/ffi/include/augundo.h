#ifndef AUGUNDO_H
#define AUGUNDO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum AugundoStatus {
  AUGUNDO_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  AUGUNDO_STATUS_NULL_ARGUMENT = 1,
  /**
   * A text argument was not valid UTF-8.
   */
  AUGUNDO_STATUS_INVALID_UTF8 = 2,
  /**
   * A buffer descriptor is inconsistent (kind, channels or stride).
   */
  AUGUNDO_STATUS_INVALID_BUFFER = 3,
  /**
   * Values or parameters were rejected by the library.
   */
  AUGUNDO_STATUS_INVALID_ARGUMENT = 4,
  /**
   * Config, record or calibration text could not be parsed.
   */
  AUGUNDO_STATUS_PARSE_ERROR = 5,
  /**
   * Nothing to evaluate (no sparse points, empty evaluation set).
   */
  AUGUNDO_STATUS_EMPTY_INPUT = 6,
  /**
   * The library panicked; this is a bug.
   */
  AUGUNDO_STATUS_INTERNAL = 7,
} AugundoStatus;

/**
 * Element type of a buffer.
 */
typedef enum AugundoElementKind {
  AUGUNDO_ELEMENT_KIND_U8 = 0,
  AUGUNDO_ELEMENT_KIND_U16 = 1,
  AUGUNDO_ELEMENT_KIND_F32 = 2,
  AUGUNDO_ELEMENT_KIND_F64 = 3,
} AugundoElementKind;

/**
 * Owned depth map in meters, 0 meaning missing.
 */
typedef struct AugundoDepth AugundoDepth;

/**
 * Owned RGB image.
 */
typedef struct AugundoImage AugundoImage;

/**
 * Owned validity mask.
 */
typedef struct AugundoMask AugundoMask;

/**
 * Borrowed, row-major input buffer.
 *
 * Images have 3 interleaved channels: u8 in 0..=255 or floats in [0, 1].
 * Depth has 1 channel: u16 millimeters or float meters, 0 meaning missing.
 * Masks have 1 channel of u8, non-zero meaning valid. `row_stride` is in
 * bytes; 0 means tightly packed. Any alignment is accepted.
 */
typedef struct AugundoBufferView {
  const void *data;
  size_t height;
  size_t width;
  size_t channels;
  enum AugundoElementKind kind;
  size_t row_stride;
} AugundoBufferView;

/**
 * Loss terms of one evaluation.
 */
typedef struct AugundoLossBreakdown {
  double photometric;
  double sparse;
  double smoothness;
  double total;
  uint64_t valid_pixel_count;
} AugundoLossBreakdown;

/**
 * Error metrics: MAE/RMSE in mm, iMAE/iRMSE in 1/m, AbsRel/SqRel and the
 * delta thresholds as fractions.
 */
typedef struct AugundoMetrics {
  double mae;
  double rmse;
  double imae;
  double irmse;
  double abs_rel;
  double sq_rel;
  double delta1;
  double delta2;
  double delta3;
  uint64_t count;
} AugundoMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *augundo_version(void);

/**
 * Samples a plan from `config_json` (null or empty: no augmentation) with
 * `seed`, applies it to the image and sparse depth, and returns the
 * augmented buffers with the serialized transform record. `out_plan`, if
 * not null, receives the full plan including photometric transforms.
 *
 * # Safety
 * Views must describe readable memory; out-pointers must be writable.
 */
enum AugundoStatus augundo_augment(const struct AugundoBufferView *image,
                                   const struct AugundoBufferView *sparse,
                                   const char *config_json,
                                   uint64_t seed,
                                   struct AugundoImage **out_image,
                                   struct AugundoDepth **out_sparse,
                                   char **out_record,
                                   char **out_plan,
                                   char **out_error);

/**
 * Warps a depth map predicted on the augmented input back to the original
 * frame. `record_json` is a transform record or a full plan.
 *
 * # Safety
 * Views must describe readable memory; out-pointers must be writable.
 */
enum AugundoStatus augundo_undo(const struct AugundoBufferView *depth,
                                const char *record_json,
                                struct AugundoDepth **out_depth,
                                struct AugundoMask **out_mask,
                                char **out_error);

/**
 * Evaluates the masked loss of `depth` on the target frame. `mask` may be
 * null (all pixels valid). `calibration_json` holds the intrinsics and the
 * two neighbour poses; `loss_json` (null or empty: defaults) holds the
 * loss configuration.
 *
 * # Safety
 * Views must describe readable memory; out-pointers must be writable.
 */
enum AugundoStatus augundo_loss(const struct AugundoBufferView *image,
                                const struct AugundoBufferView *prev,
                                const struct AugundoBufferView *next,
                                const struct AugundoBufferView *sparse,
                                const struct AugundoBufferView *depth,
                                const struct AugundoBufferView *mask,
                                const char *calibration_json,
                                const char *loss_json,
                                struct AugundoLossBreakdown *out,
                                char **out_error);

/**
 * Scores `pred` against ground truth over pixels with gt in
 * [min_depth, max_depth]; gt 0 marks missing values.
 *
 * # Safety
 * Views must describe readable memory; `out` must be writable.
 */
enum AugundoStatus augundo_metrics(const struct AugundoBufferView *pred,
                                   const struct AugundoBufferView *gt,
                                   double min_depth,
                                   double max_depth,
                                   struct AugundoMetrics *out,
                                   char **out_error);

/**
 * Image height and width; zeros for a null handle.
 *
 * # Safety
 * `image` must be null or a live handle.
 */
void augundo_image_dims(const struct AugundoImage *image, size_t *height, size_t *width);

/**
 * Interleaved RGB intensities (height * width * 3 values), valid until the
 * handle is freed.
 *
 * # Safety
 * `image` must be null or a live handle.
 */
const double *augundo_image_data(const struct AugundoImage *image);

/**
 * Writes round(v * 255) into `out`, which holds `len` bytes.
 *
 * # Safety
 * `image` must be a live handle and `out` writable for `len` bytes.
 */
enum AugundoStatus augundo_image_to_u8(const struct AugundoImage *image, uint8_t *out, size_t len);

/**
 * # Safety
 * `image` must be null or a handle not yet freed.
 */
void augundo_image_free(struct AugundoImage *image);

/**
 * Depth height and width; zeros for a null handle.
 *
 * # Safety
 * `depth` must be null or a live handle.
 */
void augundo_depth_dims(const struct AugundoDepth *depth, size_t *height, size_t *width);

/**
 * Depth in meters (height * width values), valid until the handle is freed.
 *
 * # Safety
 * `depth` must be null or a live handle.
 */
const double *augundo_depth_data(const struct AugundoDepth *depth);

/**
 * Writes rounded millimeters, saturating at 65535, into `out` of `len` values.
 *
 * # Safety
 * `depth` must be a live handle and `out` writable for `len` values.
 */
enum AugundoStatus augundo_depth_to_u16(const struct AugundoDepth *depth,
                                        uint16_t *out,
                                        size_t len);

/**
 * # Safety
 * `depth` must be null or a handle not yet freed.
 */
void augundo_depth_free(struct AugundoDepth *depth);

/**
 * Mask height and width; zeros for a null handle.
 *
 * # Safety
 * `mask` must be null or a live handle.
 */
void augundo_mask_dims(const struct AugundoMask *mask, size_t *height, size_t *width);

/**
 * Number of valid pixels; 0 for a null handle.
 *
 * # Safety
 * `mask` must be null or a live handle.
 */
size_t augundo_mask_valid_count(const struct AugundoMask *mask);

/**
 * Writes 1 for valid and 0 for invalid pixels into `out` of `len` bytes.
 *
 * # Safety
 * `mask` must be a live handle and `out` writable for `len` bytes.
 */
enum AugundoStatus augundo_mask_to_u8(const struct AugundoMask *mask, uint8_t *out, size_t len);

/**
 * # Safety
 * `mask` must be null or a handle not yet freed.
 */
void augundo_mask_free(struct AugundoMask *mask);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void augundo_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUGUNDO_H */
