/* C interface to the airfed joint device-selection and beamforming solvers.
 *
 * Build an immutable problem from raw channel and dataset-size arrays, solve
 * it with one of the four methods, and read the solution back through
 * getters. Handles are opaque pointers owned by the library; every fallible
 * call returns an AfStatus and writes through out-pointers only on success.
 *
 * Kept in sync with src/lib.rs by hand; cbindgen.toml next to this crate
 * holds the settings to regenerate it with
 * `cbindgen --config cbindgen.toml --crate airfed-ffi --output include/airfed.h`.
 */

#ifndef AIRFED_H
#define AIRFED_H

#include <stddef.h>
#include <stdint.h>

/* Method code for the greedy spatial device search. */
#define AF_METHOD_GSDS 0

/* Method code for the alternating selection/beamforming optimization. */
#define AF_METHOD_ADSBF 1

/* Method code for the select-all baseline. */
#define AF_METHOD_SELECT_ALL 2

/* Method code for the strongest-device baseline. */
#define AF_METHOD_TOP_ONE 3

/* Status code returned by every fallible entry point. */
typedef enum AfStatus {
  /* The call succeeded and all out-parameters are valid. */
  AF_STATUS_OK = 0,
  /* A required pointer argument was null. */
  AF_STATUS_NULL_ARGUMENT = 1,
  /* An argument violated a documented precondition. */
  AF_STATUS_INVALID_ARGUMENT = 2,
  /* The iterative solver failed to produce a usable design. */
  AF_STATUS_SOLVER_FAILURE = 3,
  /* An unexpected internal failure; the out-parameters are untouched. */
  AF_STATUS_INTERNAL = 4,
} AfStatus;

/* An immutable solver input: per-device channels and dataset sizes plus the
 * power budget and noise level.
 */
typedef struct AfProblem AfProblem;

/* A solved design: the device subset, the unit-norm receive beamformer, and
 * the objective value they achieve.
 */
typedef struct AfSolution AfSolution;

#ifdef __cplusplus
extern "C" {
#endif

/* Builds a problem from raw arrays.
 *
 * `channels` holds 2 * num_devices * num_antennas doubles: device-major,
 * antenna-minor, each entry as a (real, imaginary) pair. `dataset_sizes`
 * holds num_devices positive sample counts. Powers are in watts;
 * `noise_power_w` may be zero for a noiseless model.
 *
 * On success writes a handle to `out_problem`; release it with
 * af_problem_free. The pointers must be valid for the lengths stated above,
 * and `out_problem` must be valid for one write.
 */
AfStatus af_problem_new(size_t num_devices,
                        size_t num_antennas,
                        const double *channels,
                        const uint64_t *dataset_sizes,
                        double power_limit_w,
                        double noise_power_w,
                        AfProblem **out_problem);

/* Releases a problem handle. A null pointer is a no-op. `problem` must be
 * null or a handle from af_problem_new not yet freed.
 */
void af_problem_free(AfProblem *problem);

/* Solves a problem with the given AF_METHOD_* code and writes a solution
 * handle to `out_solution`. `problem` must be a live handle from
 * af_problem_new and `out_solution` valid for one write.
 */
AfStatus af_solve(const AfProblem *problem,
                  int32_t method,
                  AfSolution **out_solution);

/* Reads the objective value of a solution. `solution` must be a live handle
 * and `out` valid for one write.
 */
AfStatus af_solution_d_value(const AfSolution *solution, double *out);

/* Reads how many devices the solution selects. `solution` must be a live
 * handle and `out` valid for one write.
 */
AfStatus af_solution_num_selected(const AfSolution *solution, size_t *out);

/* Copies the selection mask (1 = selected) into `out_mask`, which must hold
 * exactly one byte per device of the solved problem. `solution` must be a
 * live handle and `out_mask` valid for `len` writes.
 */
AfStatus af_solution_selection(const AfSolution *solution,
                               uint8_t *out_mask,
                               size_t len);

/* Copies the unit-norm beamformer into `out`, which must hold two doubles
 * (real, imaginary) per antenna of the solved problem. `solution` must be a
 * live handle and `out` valid for `len` writes.
 */
AfStatus af_solution_beamformer(const AfSolution *solution,
                                double *out,
                                size_t len);

/* Releases a solution handle. A null pointer is a no-op. `solution` must be
 * null or a handle from af_solve not yet freed.
 */
void af_solution_free(AfSolution *solution);

/* Returns a static, null-terminated description of a status code. */
const char *af_status_message(int32_t status);

#ifdef __cplusplus
}
#endif

#endif /* AIRFED_H */
