#ifndef DDNOMA_H
#define DDNOMA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Success.
#define DDNOMA_OK 0

// A pointer argument was null, or a string argument was not valid UTF-8.
#define DDNOMA_ERR_ARG 1

// The configuration was rejected (same class the CLI exits 2 on).
#define DDNOMA_ERR_CONFIG 2

// A numeric routine failed (same class the CLI exits 3 on).
#define DDNOMA_ERR_NUMERIC 3

// The output file could not be written.
#define DDNOMA_ERR_IO 4

// An internal invariant was violated; the handle is still valid but the
// result must not be trusted. Please report the message as a bug.
#define DDNOMA_ERR_PANIC 5

// Opaque experiment description. Create with
// [`ddnoma_experiment_default`] or [`ddnoma_experiment_from_toml`], release
// with [`ddnoma_experiment_free`].
typedef struct DdnomaExperiment DdnomaExperiment;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Allocates an experiment with the built-in defaults (Hermite scheme, two
// users, the standard sweep). Never fails. Free with
// [`ddnoma_experiment_free`].
struct DdnomaExperiment *ddnoma_experiment_default(void);

// Parses and validates a TOML experiment description (the same text the CLI
// accepts via `--config`). Returns null on failure; call
// [`ddnoma_last_error`] for the reason.
//
// # Safety
// `text` must be null or point at a NUL-terminated string that stays valid
// for the duration of the call.
struct DdnomaExperiment *ddnoma_experiment_from_toml(const char *text);

// Releases an experiment handle. Passing null is a no-op. Passing the same
// handle twice, or a pointer not returned by this library, is undefined
// behaviour.
//
// # Safety
// `handle` must be null or a pointer obtained from
// [`ddnoma_experiment_default`] or [`ddnoma_experiment_from_toml`] that has
// not been freed yet.
void ddnoma_experiment_free(struct DdnomaExperiment *handle);

// Runs the Monte-Carlo bit-error-rate sweep described by `handle` and writes
// the result CSV (with `#` metadata header lines) to `out_path`. Identical
// configurations and seeds produce byte-identical files.
//
// # Safety
// `handle` must be a live pointer from this library; `out_path` must be null
// or a NUL-terminated string. Both must stay valid for the duration of the
// call.
int ddnoma_run_ber_csv(const struct DdnomaExperiment *handle, const char *out_path);

// Computes the self-ambiguity surface of a pulse train on the delay-Doppler
// lattice and writes it as CSV. `family` is `"rect"`, `"rrc"`, or
// `"hermite"`; `order` only matters for Hermite, `beta` only for RRC.
//
// # Safety
// `family` and `out_path` must be null or NUL-terminated strings valid for
// the duration of the call.
int ddnoma_ambiguity_csv(const char *family,
                         uint32_t order,
                         double beta,
                         uint32_t m,
                         uint32_t n,
                         double delta_f_hz,
                         uint32_t sps,
                         const char *out_path);

// Writes the sampled waveform of a pulse train as CSV rows `idx,t_s,re,im`.
// Arguments follow [`ddnoma_ambiguity_csv`].
//
// # Safety
// `family` and `out_path` must be null or NUL-terminated strings valid for
// the duration of the call.
int ddnoma_pulses_csv(const char *family,
                      uint32_t order,
                      double beta,
                      uint32_t m,
                      uint32_t n,
                      double delta_f_hz,
                      uint32_t sps,
                      const char *out_path);

// Writes the spectral-efficiency comparison table (every ordered scheme pair
// with bits-per-bin rates and their ratio) as CSV. `qam` is the
// constellation size, `users` the user count, `k` the resource-group size of
// the sparse-code scheme.
//
// # Safety
// `out_path` must be null or a NUL-terminated string valid for the duration
// of the call.
int ddnoma_se_report_csv(uint32_t qam, uint32_t users, uint32_t k, const char *out_path);

// Returns the message for the most recent failure on the calling thread, or
// null if the last call succeeded. The pointer stays valid until the next
// call into this library from the same thread; copy it if you need to keep
// it.
const char *ddnoma_last_error(void);

// Returns the library version as a static string; never null.
const char *ddnoma_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DDNOMA_H */
