#ifndef ADVSCEN_H
#define ADVSCEN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AdvscenStatus {
  ADVSCEN_STATUS_OK = 0,
  ADVSCEN_STATUS_NULL_POINTER = 1,
  ADVSCEN_STATUS_INVALID_ARGUMENT = 2,
  ADVSCEN_STATUS_CONFIG = 3,
  ADVSCEN_STATUS_IO = 4,
  ADVSCEN_STATUS_RUNTIME = 5,
  ADVSCEN_STATUS_PANIC = 6,
} AdvscenStatus;

typedef enum AdvscenOutcome {
  ADVSCEN_OUTCOME_SUCCESS = 0,
  ADVSCEN_OUTCOME_CRASH = 1,
  ADVSCEN_OUTCOME_TIMEOUT = 2,
} AdvscenOutcome;

/*
 Controller under test.
 */
typedef struct AdvscenEgo AdvscenEgo;

/*
 World dynamics and reward settings.
 */
typedef struct AdvscenEnv AdvscenEnv;

/*
 Surrounding traffic: naturalistic IDM or one trained adversary.
 */
typedef struct AdvscenTraffic AdvscenTraffic;

typedef struct AdvscenEvalStats {
  uint64_t episodes;
  double success_rate;
  double crash_rate;
  double timeout_rate;
  double mean_ego_return;
  double mean_adv_return;
} AdvscenEvalStats;

typedef struct AdvscenEpisode {
  uint64_t seed;
  enum AdvscenOutcome outcome;
  uint32_t steps;
  double ego_return;
  double adv_return;
} AdvscenEpisode;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *advscen_version(void);

/*
 Message of the last failed call on this thread, or NULL. Valid until
 the next call into the library from this thread.
 */
const char *advscen_last_error(void);

/*
 Build a world from JSON `{"scenario": {...}, "reward": {...}}`; NULL
 selects the defaults.

 # Safety
 `json` is NULL or a NUL-terminated string; `out` is writable.
 */
enum AdvscenStatus advscen_env_new(const char *json, struct AdvscenEnv **out);

/*
 # Safety
 `env` is NULL or a handle from [`advscen_env_new`], not used afterwards.
 */
void advscen_env_free(struct AdvscenEnv *env);

/*
 Rule-based gap-acceptance ego with default thresholds.

 # Safety
 `out` is writable.
 */
enum AdvscenStatus advscen_ego_gap_new(struct AdvscenEgo **out);

/*
 DQN ego from a `q_network.json` written by `advscen train-ego`.

 # Safety
 `path` is a NUL-terminated string; `out` is writable.
 */
enum AdvscenStatus advscen_ego_dqn_load(const char *path, struct AdvscenEgo **out);

/*
 # Safety
 `ego` is NULL or a handle from an `advscen_ego_*` constructor, not used
 afterwards.
 */
void advscen_ego_free(struct AdvscenEgo *ego);

/*
 Naturalistic IDM traffic.

 # Safety
 `out` is writable.
 */
enum AdvscenStatus advscen_traffic_naturalistic_new(struct AdvscenTraffic **out);

/*
 Trained adversary from an ensemble member directory
 (`.../ensemble/member-XXX`).

 # Safety
 `member_dir` is a NUL-terminated string; `out` is writable.
 */
enum AdvscenStatus advscen_traffic_member_load(const char *member_dir, struct AdvscenTraffic **out);

/*
 # Safety
 `traffic` is NULL or a handle from an `advscen_traffic_*` constructor,
 not used afterwards.
 */
void advscen_traffic_free(struct AdvscenTraffic *traffic);

/*
 Run `episodes` fresh episodes from evaluation seed `seed` and write the
 aggregate rates. Identical arguments give identical results.

 # Safety
 Handles are valid; `out` is writable.
 */
enum AdvscenStatus advscen_evaluate(const struct AdvscenEnv *env,
                                    const struct AdvscenTraffic *traffic,
                                    const struct AdvscenEgo *ego,
                                    uint64_t episodes,
                                    uint64_t seed,
                                    struct AdvscenEvalStats *out);

/*
 Like [`advscen_evaluate`] but writes one record per episode into `out`,
 which must hold `capacity >= episodes` entries.

 # Safety
 Handles are valid; `out` points to `capacity` writable records.
 */
enum AdvscenStatus advscen_episodes(const struct AdvscenEnv *env,
                                    const struct AdvscenTraffic *traffic,
                                    const struct AdvscenEgo *ego,
                                    uint64_t episodes,
                                    uint64_t seed,
                                    struct AdvscenEpisode *out,
                                    size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADVSCEN_H */
