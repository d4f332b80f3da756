#ifndef SRW_H
#define SRW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SrwStatus {
  SRW_STATUS_OK = 0,
  SRW_STATUS_NULL_POINTER = 1,
  SRW_STATUS_INVALID_UTF8 = 2,
  SRW_STATUS_PARSE = 3,
  SRW_STATUS_IO = 4,
  SRW_STATUS_TOPOLOGY = 5,
  SRW_STATUS_GEOMETRY = 6,
  SRW_STATUS_UNMAPPED_LABEL = 7,
  SRW_STATUS_DIMENSION_MISMATCH = 8,
  SRW_STATUS_INVALID_ARGUMENT = 9,
  SRW_STATUS_PANIC = 10,
} SrwStatus;

typedef enum SrwFilterReason {
  SRW_FILTER_REASON_OK = 0,
  SRW_FILTER_REASON_PLANE_WITH_TWO_JUNCTIONS = 1,
  SRW_FILTER_REASON_DEGENERATE_PLANE = 2,
  // A junction lies farther than the allowed distance from its plane.
  SRW_FILTER_REASON_RESIDUAL_EXCEEDS_MAX = 3,
} SrwFilterReason;

typedef enum SrwPlaneLabel {
  SRW_PLANE_LABEL_WALL = 0,
  SRW_PLANE_LABEL_FLOOR = 1,
  SRW_PLANE_LABEL_CEILING = 2,
  SRW_PLANE_LABEL_DOOR = 3,
  SRW_PLANE_LABEL_WINDOW = 4,
} SrwPlaneLabel;

typedef enum SrwLineLabel {
  SRW_LINE_LABEL_INVALID = 0,
  SRW_LINE_LABEL_WALL = 1,
  SRW_LINE_LABEL_FLOOR = 2,
  SRW_LINE_LABEL_CEILING = 3,
  SRW_LINE_LABEL_DOOR = 4,
  SRW_LINE_LABEL_WINDOW = 5,
} SrwLineLabel;

// Opaque scene handle.
typedef struct SrwScene SrwScene;

// Opaque camera view handle.
typedef struct SrwView SrwView;

// Outcome of [`srw_scene_filter`]. `plane_id` is meaningful only when
// `has_plane_id` is set.
typedef struct SrwFilterReport {
  bool accepted;
  enum SrwFilterReason reason;
  double max_residual_mm;
  bool has_plane_id;
  int64_t plane_id;
} SrwFilterReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into this library on the same thread.
const char *srw_last_error(void);

// Library version as a static string.
const char *srw_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void srw_string_free(char *s);

// Parses a scene document.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum SrwStatus srw_scene_from_json(const char *json, struct SrwScene **out);

// Loads a scene document from a file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SrwStatus srw_scene_load(const char *path, struct SrwScene **out);

// Releases a scene. Null is ignored.
//
// # Safety
// `scene` must come from this library and not have been freed.
void srw_scene_free(struct SrwScene *scene);

// Number of junctions, lines and planes in a scene.
//
// # Safety
// `scene` must be a live handle; the output pointers must be writable.
enum SrwStatus srw_scene_counts(const struct SrwScene *scene,
                                size_t *junctions,
                                size_t *lines,
                                size_t *planes);

// Checks plane topology and planarity. An accepted scene has its plane
// parameters replaced by the refit values.
//
// # Safety
// `scene` must be a live handle; `report` must be writable.
enum SrwStatus srw_scene_filter(struct SrwScene *scene,
                                double max_residual_mm,
                                struct SrwFilterReport *report);

// Parses a camera view document.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum SrwStatus srw_view_from_json(const char *json, struct SrwView **out);

// Loads a camera view document from a file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SrwStatus srw_view_load(const char *path, struct SrwView **out);

// Releases a view. Null is ignored.
//
// # Safety
// `view` must come from this library and not have been freed.
void srw_view_free(struct SrwView *view);

// Annotates one view of a scene and returns the wireframe as JSON.
// `door_states_json` is a JSON array of door reports, or null to treat
// every door as closed.
//
// # Safety
// `scene` and `view` must be live handles; `door_states_json` must be null
// or a NUL-terminated string; `out_json` must be writable.
enum SrwStatus srw_annotate(const struct SrwScene *scene,
                            const struct SrwView *view,
                            const char *door_states_json,
                            char **out_json);

// Fits a plane to `count` points stored as consecutive `x, y, z` triples.
// Writes `nx, ny, nz, d` with a unit normal.
//
// # Safety
// `points` must hold `3 * count` doubles; `out_plane` must hold 4.
enum SrwStatus srw_fit_plane(const double *points, size_t count, double *out_plane);

// Semantic label of a line shared by planes labelled `a` and `b`.
//
// # Safety
// `out` must be writable.
enum SrwStatus srw_line_label_from_planes(enum SrwPlaneLabel a,
                                          enum SrwPlaneLabel b,
                                          enum SrwLineLabel *out);

// Scores `count` predictions against ground truth with the default
// thresholds. `gt_json[i]` is an annotated view and `pred_json[i]` its
// prediction. Writes the evaluation report as JSON.
//
// # Safety
// `gt_json` and `pred_json` must each hold `count` NUL-terminated strings;
// `out_json` must be writable.
enum SrwStatus srw_evaluate(const char *const *gt_json,
                            const char *const *pred_json,
                            size_t count,
                            bool semantic,
                            char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SRW_H */
