#ifndef LUMIGRASP_H
#define LUMIGRASP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by all functions.
typedef enum LgStatus {
  LG_STATUS_OK = 0,
  LG_STATUS_NULL_POINTER = 1,
  LG_STATUS_INVALID_ARGUMENT = 2,
  LG_STATUS_DATA_ERROR = 3,
  LG_STATUS_NUMERIC_ERROR = 4,
  LG_STATUS_BUFFER_TOO_SMALL = 5,
  LG_STATUS_PANIC = 6,
} LgStatus;

// Trained model handle. Opaque to C.
typedef struct LgModel LgModel;

// One planned grasp. `depth_m` is in metres.
typedef struct LgGraspPoint {
  uint8_t class_id;
  uint32_t row;
  uint32_t col;
  double depth_m;
} LgGraspPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Loads a model directory written by `lumigrasp train`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum LgStatus lg_model_load(const char *path, struct LgModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from [`lg_model_load`] and not be used afterwards.
void lg_model_free(struct LgModel *model);

// Number of classes the model predicts, 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
uint32_t lg_model_classes(const struct LgModel *model);

// Semantic mask of an RGB image; `labels_out` holds `width * height` bytes.
//
// # Safety
// `rgb` must hold `3 * width * height` bytes and `labels_out` `width * height`.
enum LgStatus lg_predict_mask(const struct LgModel *model,
                              const uint8_t *rgb,
                              uint32_t width,
                              uint32_t height,
                              uint8_t *labels_out);

// Grasp sequence for a mask and depth map, largest region first.
//
// `k = 0` selects the default `ceil(area / 100)` policy. At most `capacity`
// points are written; `len_out` always receives the full count, and
// `BufferTooSmall` is returned when it exceeds `capacity`.
//
// # Safety
// `labels` and `depth_mm` must hold `width * height` elements and `points_out`
// `capacity` (it may be null when `capacity` is 0).
enum LgStatus lg_plan_grasps(const uint8_t *labels,
                             const uint16_t *depth_mm,
                             uint32_t width,
                             uint32_t height,
                             uint32_t k,
                             struct LgGraspPoint *points_out,
                             size_t capacity,
                             size_t *len_out);

// Bilateral smoothing then hole filling with default parameters.
//
// # Safety
// Both buffers must hold `width * height` elements; they may not overlap.
enum LgStatus lg_enhance_depth(const uint16_t *depth_mm,
                               uint32_t width,
                               uint32_t height,
                               uint16_t *depth_out);

// Low-frequency amplitude transfer from `target` onto `source`.
//
// # Safety
// All three buffers must hold `3 * width * height` bytes.
enum LgStatus lg_fda_transfer(const uint8_t *source,
                              const uint8_t *target,
                              uint32_t width,
                              uint32_t height,
                              double beta,
                              uint8_t *rgb_out);

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to fit) and returns the full message length without the NUL.
// Pass a null `buf` to query the length.
//
// # Safety
// `buf` must be null or hold `len` bytes.
size_t lg_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LUMIGRASP_H */
