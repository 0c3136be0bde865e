#ifndef SPHERE_STAGE_H
#define SPHERE_STAGE_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SS_LIGHT_FRAME_LEN 11

typedef enum {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_ARGUMENT = 1,
  SS_STATUS_INVALID_UTF8 = 2,
  SS_STATUS_INVALID_CONFIG = 3,
  SS_STATUS_INVALID_FRAME = 4,
  SS_STATUS_ENGINE_FAILURE = 5,
  SS_STATUS_BUFFER_TOO_SMALL = 6,
  SS_STATUS_INVALID_LIGHT_FRAME = 7,
  SS_STATUS_NOT_ENCODABLE = 8,
  SS_STATUS_INVALID_ARGUMENT = 9,
  SS_STATUS_PANIC = 10,
} SsStatus;

/**
 * Opaque engine handle.
 */
typedef struct SsEngine SsEngine;

/**
 * Camera and floor description, field for field the engine's calibration.
 */
typedef struct {
  double image_width;
  double image_height;
  double focal_length;
  double k1;
  double camera_height;
  double floor_width;
  double floor_length;
} SsCalibration;

/**
 * A light command. `effect` is 0 steady, 1 pulse, 2 fade.
 */
typedef struct {
  uint8_t sphere_id;
  uint8_t r;
  uint8_t g;
  uint8_t b;
  uint8_t effect;
  uint8_t param;
  uint16_t seq;
} SsLightCommand;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ss_version(void);

/**
 * Message for the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next library call on this thread.
 */
const char *ss_last_error(void);

/**
 * Release a string returned by the library. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library and not yet freed.
 */
void ss_string_free(char *s);

/**
 * Create an engine from an installation config in JSON. A NULL config
 * selects the built-in defaults.
 *
 * # Safety
 * `config_json` must be NULL or a NUL-terminated string; `out` must be a
 * writable pointer.
 */
SsStatus ss_engine_new(const char *config_json, SsEngine **out);

/**
 * Destroy an engine. NULL is ignored.
 *
 * # Safety
 * `engine` must be NULL or a handle from `ss_engine_new` not yet freed.
 */
void ss_engine_free(SsEngine *engine);

/**
 * Feed one detection frame in its JSON-line form. On success `*out_json`
 * receives `{"t_ms":..,"events":[..],"lights":[..]}`, to be released with
 * `ss_string_free`.
 *
 * # Safety
 * `engine` must be a live handle, `line` a NUL-terminated string and
 * `out_json` a writable pointer.
 */
SsStatus ss_engine_push_line(SsEngine *engine, const char *line, char **out_json);

/**
 * Number of live tracks.
 *
 * # Safety
 * `engine` must be a live handle and `out` writable.
 */
SsStatus ss_engine_track_count(const SsEngine *engine, size_t *out);

/**
 * # Safety
 * `out` must be writable.
 */
SsStatus ss_calibration_default(SsCalibration *out);

/**
 * Undistort a pixel and map it onto the floor, in meters.
 *
 * # Safety
 * `cal` must be readable; `x` and `y` writable.
 */
SsStatus ss_pixel_to_world(const SsCalibration *cal, double u, double v, double *x, double *y);

/**
 * Inverse of `ss_pixel_to_world`, distortion included.
 *
 * # Safety
 * `cal` must be readable; `u` and `v` writable.
 */
SsStatus ss_world_to_pixel(const SsCalibration *cal, double x, double y, double *u, double *v);

/**
 * Height of a sphere's center above the floor from its apparent diameter.
 *
 * # Safety
 * `cal` must be readable and `out` writable.
 */
SsStatus ss_estimate_height(const SsCalibration *cal,
                            double d_px,
                            double physical_diameter,
                            double *out);

/**
 * Row-major zone index of a floor point on a `cols` x `rows` grid.
 *
 * # Safety
 * `cal` must be readable and `out` writable.
 */
SsStatus ss_zone_of(const SsCalibration *cal,
                    uint32_t cols,
                    uint32_t rows,
                    double x,
                    double y,
                    uint32_t *out);

/**
 * Encode a light command into `SS_LIGHT_FRAME_LEN` bytes at `out`.
 *
 * # Safety
 * `cmd` must be readable and `out` writable for `SS_LIGHT_FRAME_LEN` bytes.
 */
SsStatus ss_light_encode(const SsLightCommand *cmd, uint8_t *out);

/**
 * Validate and decode a light datagram.
 *
 * # Safety
 * `bytes` must be readable for `len` bytes and `out` writable.
 */
SsStatus ss_light_decode(const uint8_t *bytes, size_t len, SsLightCommand *out);

/**
 * Encode an engine event (one JSON object, as in the event log) as an OSC
 * message. `*written` receives the datagram length; when `capacity` is too
 * small nothing is copied and the status is `SS_STATUS_BUFFER_TOO_SMALL`.
 *
 * # Safety
 * `event_json` must be a NUL-terminated string, `buf` writable for
 * `capacity` bytes (or NULL with zero capacity) and `written` writable.
 */
SsStatus ss_osc_encode(const char *event_json, uint8_t *buf, size_t capacity, size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPHERE_STAGE_H */
