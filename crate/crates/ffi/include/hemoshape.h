#ifndef HEMOSHAPE_H
#define HEMOSHAPE_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_CONFIG = 2,
  HS_STATUS_SOLVER = 3,
  HS_STATUS_IO = 4,
  HS_STATUS_VERIFICATION = 5,
  HS_STATUS_OPTIMIZER = 6,
  HS_STATUS_NULL_ARGUMENT = 10,
  HS_STATUS_INVALID_STRING = 11,
  HS_STATUS_PANIC = 12,
  HS_STATUS_BUFFER_TOO_SMALL = 13,
} HsStatus;

// A validated run configuration.
typedef struct HsConfig HsConfig;

// One forward solve: moving mesh, ensemble states and functional value.
typedef struct HsRun HsRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or an empty string.
// The pointer stays valid until the next failing call on the same thread.
const char *hs_last_error(void);

// Library version as a static NUL-terminated string.
const char *hs_version(void);

// Config schema version understood by this build.
uint32_t hs_schema_version(void);

// Loads and validates a JSON config file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum HsStatus hs_config_load(const char *path, struct HsConfig **out);

// Parses and validates a JSON config held in memory.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum HsStatus hs_config_from_json(const char *json, struct HsConfig **out);

// # Safety
// `cfg` must come from `hs_config_load` or `hs_config_from_json`, or be null.
void hs_config_free(struct HsConfig *cfg);

// Writes the config's SHA-256 as 64 hex characters plus a NUL into `buf`,
// which must hold at least 65 bytes.
//
// # Safety
// `cfg` must be a live handle and `buf` writable for `len` bytes.
enum HsStatus hs_config_hash(const struct HsConfig *cfg, char *buf, size_t len);

// Runs the forward pipeline on the config's own domain and velocity.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum HsStatus hs_solve(const struct HsConfig *cfg, struct HsRun **out);

// # Safety
// `run` must come from `hs_solve`, or be null.
void hs_run_free(struct HsRun *run);

// Functional value (minimum over the ensemble).
//
// # Safety
// `run` must be a live handle and `value` a valid pointer.
enum HsStatus hs_run_functional(const struct HsRun *run, double *value);

// Number of time layers, including t = 0.
//
// # Safety
// `run` must be a live handle and `layers` a valid pointer.
enum HsStatus hs_run_layers(const struct HsRun *run, size_t *layers);

// Largest relative energy-identity residual over every solved member.
//
// # Safety
// `run` must be a live handle and `residual` a valid pointer.
enum HsStatus hs_run_energy_residual(const struct HsRun *run, double *residual);

// Runs `simulate` and writes its exports. A null `out_dir` uses the config's.
//
// # Safety
// `cfg` must be a live handle; `out_dir` null or a NUL-terminated string.
enum HsStatus hs_simulate(const struct HsConfig *cfg, const char *out_dir);

// Runs the optimizer, optionally resuming from the state in `out_dir`, and
// stores the best value found.
//
// # Safety
// `cfg` must be a live handle, `out_dir` null or a NUL-terminated string,
// and `best` a valid pointer.
enum HsStatus hs_optimize(const struct HsConfig *cfg,
                          const char *out_dir,
                          bool resume,
                          double *best);

// Runs a verification suite by name and writes `verify_report.json` into
// `out_dir`. A failing suite returns `Verification`.
//
// # Safety
// `suite` and `out_dir` must be NUL-terminated strings.
enum HsStatus hs_verify(const char *suite, uint64_t seed, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEMOSHAPE_H */
