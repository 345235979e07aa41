#ifndef EXPLOREKIT_H
#define EXPLOREKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EkStatus {
  EK_STATUS_OK = 0,
  EK_STATUS_NULL_ARGUMENT = 1,
  EK_STATUS_INVALID_UTF8 = 2,
  EK_STATUS_PARSE = 3,
  EK_STATUS_NOT_FOUND = 4,
  EK_STATUS_UNREACHABLE = 5,
  EK_STATUS_INTERNAL = 6,
} EkStatus;

/*
 Opaque world handle.
 */
typedef struct EkWorld EkWorld;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on this thread.
 */
const char *ek_last_error_message(void);

/*
 # Safety
 `s` must be null or a string returned by this library, freed at most once.
 */
void ek_string_free(char *s);

/*
 # Safety
 `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum EkStatus ek_world_load_file(const char *path, struct EkWorld **out);

/*
 # Safety
 `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum EkStatus ek_world_from_json(const char *json, struct EkWorld **out);

/*
 # Safety
 `w` must be null or a handle from this library, freed at most once.
 */
void ek_world_free(struct EkWorld *w);

/*
 Number of tasks, or 0 for a null handle.

 # Safety
 `w` must be null or a live handle.
 */
size_t ek_world_task_count(const struct EkWorld *w);

/*
 # Safety
 `w` must be null or a live handle.
 */
size_t ek_world_skill_count(const struct EkWorld *w);

/*
 Shortest number of skill executions that completes `task`.

 # Safety
 Pointers must be valid; `task` NUL-terminated.
 */
enum EkStatus ek_min_plan_length(const struct EkWorld *w, const char *task, size_t *out);

/*
 Maps free text such as "Next skill: get sticks" to a catalog skill name.

 # Safety
 Pointers must be valid; `output` NUL-terminated.
 */
enum EkStatus ek_retrieve(const struct EkWorld *w, const char *output, char **out);

/*
 Gap analysis for requirements against collections, all given in the
 "2.0 log; 3.0 dirt" form.

 # Safety
 All string arguments NUL-terminated; `out` valid.
 */
enum EkStatus ek_gap_check(const char *task,
                           const char *requirements,
                           const char *inventory,
                           const char *surroundings,
                           char **out);

/*
 Decision prompt for a world task. `history` holds executed skill names
 separated by newlines (may be empty).

 # Safety
 Pointers must be valid; strings NUL-terminated.
 */
enum EkStatus ek_render_decision(const struct EkWorld *w,
                                 const char *task,
                                 const char *inventory,
                                 const char *surroundings,
                                 const char *history,
                                 char **out);

/*
 Runs one oracle episode and returns the trajectory as JSON.

 # Safety
 Pointers must be valid; `task` NUL-terminated.
 */
enum EkStatus ek_run_oracle_episode(const struct EkWorld *w,
                                    const char *task,
                                    uint64_t seed,
                                    bool deterministic,
                                    char **out);

/*
 Builds dataset JSON-Lines from a JSON array of trajectories.

 # Safety
 Pointers must be valid; `trajectories_json` NUL-terminated.
 */
enum EkStatus ek_build_dataset_jsonl(const char *trajectories_json, bool dedup, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXPLOREKIT_H */
