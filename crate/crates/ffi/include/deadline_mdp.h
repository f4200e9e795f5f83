#ifndef DEADLINE_MDP_H
#define DEADLINE_MDP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes shared by every function.
 */
typedef enum DmStatus {
  DM_STATUS_OK = 0,
  DM_STATUS_NULL_POINTER = 1,
  DM_STATUS_INVALID_UTF8 = 2,
  DM_STATUS_INVALID_SPEC = 3,
  DM_STATUS_SOLVER_FAILURE = 4,
  DM_STATUS_INVALID_ARGUMENT = 5,
  DM_STATUS_BUFFER_TOO_SMALL = 6,
  DM_STATUS_PANIC = 7,
} DmStatus;

/*
 An optimal LP solution together with its extracted policy.
 */
typedef struct DmSolution DmSolution;

/*
 A parsed and validated problem instance.
 */
typedef struct DmSpec DmSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failure on this thread, or an empty string.
 The pointer stays valid until the next call into this library on the
 same thread.
 */
const char *dm_last_error_message(void);

/*
 Parses a JSON spec. On success `*out` receives a handle to free with
 [`dm_spec_free`].

 # Safety
 `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DmStatus dm_spec_parse(const char *json, struct DmSpec **out);

/*
 # Safety
 `spec` must be null or a handle from [`dm_spec_parse`] not yet freed.
 */
void dm_spec_free(struct DmSpec *spec);

/*
 Number of nodes, links and flows of a spec.

 # Safety
 `spec` must be a live handle; the out pointers may be null.
 */
enum DmStatus dm_spec_shape(const struct DmSpec *spec, size_t *nodes, size_t *links, size_t *flows);

/*
 Solves the LP. On success `*out` receives a handle to free with
 [`dm_solution_free`].

 # Safety
 `spec` must be a live handle and `out` a valid pointer.
 */
enum DmStatus dm_solve(const struct DmSpec *spec, struct DmSolution **out);

/*
 # Safety
 `sol` must be null or a handle from [`dm_solve`] not yet freed.
 */
void dm_solution_free(struct DmSolution *sol);

/*
 Optimal weighted timely throughput.

 # Safety
 `sol` must be a live handle and `out` a valid pointer.
 */
enum DmStatus dm_solution_objective(const struct DmSolution *sol, double *out);

/*
 Copies the node prices into `out[0..len]`. `len` must equal the number
 of nodes; otherwise `BufferTooSmall` is returned.

 # Safety
 `sol` must be a live handle and `out` must point to `len` doubles.
 */
enum DmStatus dm_solution_prices(const struct DmSolution *sol, double *out, size_t len);

/*
 Expected energy per slot at each node under the optimal policy.

 # Safety
 As for [`dm_solution_prices`].
 */
enum DmStatus dm_solution_node_power(const struct DmSolution *sol, double *out, size_t len);

/*
 The optimal policy as a JSON array of `{flow, node, ttg, actions}` rows.

 # Safety
 `sol` must be a live handle and `out` a valid pointer. Free the string
 with [`dm_string_free`].
 */
enum DmStatus dm_solution_policy_json(const struct DmSolution *sol, char **out);

/*
 Dual function value at the node prices `prices[0..len]`.

 # Safety
 `spec` must be a live handle, `prices` must point to `len` doubles and
 `out` must be valid.
 */
enum DmStatus dm_dual_function(const struct DmSpec *spec,
                               const double *prices,
                               size_t len,
                               double *out);

/*
 Simulates `policy` (`optimal`, `truncated-link`, `truncated-peak`,
 `edf-sp` or `edf-bp`) for `horizon` slots and returns the metrics as
 JSON.

 # Safety
 `spec` must be a live handle, `policy` a NUL-terminated string and `out`
 valid. Free the string with [`dm_string_free`].
 */
enum DmStatus dm_simulate(const struct DmSpec *spec,
                          const char *policy,
                          uint64_t horizon,
                          uint64_t seed,
                          char **out);

/*
 Releases a string returned by this library.

 # Safety
 `s` must be null or a string from this library not yet freed.
 */
void dm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEADLINE_MDP_H */
