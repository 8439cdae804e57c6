#ifndef TSPN_H
#define TSPN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Largest instance `tspn_exact_oracle` accepts.
#define TSPN_ORACLE_MAX_N 9

typedef enum TspnStatus {
  TSPN_STATUS_OK = 0,
  TSPN_STATUS_NULL_POINTER = 1,
  TSPN_STATUS_INVALID_ARGUMENT = 2,
  TSPN_STATUS_INVALID_INSTANCE = 3,
  TSPN_STATUS_PARSE = 4,
  TSPN_STATUS_IO = 5,
  TSPN_STATUS_TOO_LARGE = 6,
  TSPN_STATUS_INFEASIBLE = 7,
  TSPN_STATUS_INTERNAL = 8,
  TSPN_STATUS_PANIC = 9,
  TSPN_STATUS_OUT_OF_RANGE = 10,
} TspnStatus;

// A set of vertical segments under construction or loaded from a file.
typedef struct TspnInstance TspnInstance;

// A closed tour with its cost.
typedef struct TspnTour TspnTour;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread; empty when none. The
// pointer stays valid until the next failing call on the same thread.
const char *tspn_last_error_message(void);

// Creates an empty instance with lengths allowed in `[1, lambda]`.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum TspnStatus tspn_instance_new(double lambda, struct TspnInstance **out);

// Appends the segment `{x} × [y_bot, y_top]`.
//
// # Safety
// `inst` must come from `tspn_instance_new` or `tspn_instance_read`.
enum TspnStatus tspn_instance_add_segment(struct TspnInstance *inst,
                                          size_t id,
                                          double x,
                                          double y_bot,
                                          double y_top);

// Loads a `TSPN-SEG` file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum TspnStatus tspn_instance_read(const char *path, struct TspnInstance **out);

// Number of segments; 0 for a null handle.
//
// # Safety
// `inst` must be null or a live instance handle.
size_t tspn_instance_len(const struct TspnInstance *inst);

// # Safety
// `inst` must be null or a live instance handle, freed at most once.
void tspn_instance_free(struct TspnInstance *inst);

// Runs the approximation scheme. `shifts` of 0 means the default.
//
// # Safety
// `inst` must be a live instance handle and `out` writable.
enum TspnStatus tspn_solve_ptas(const struct TspnInstance *inst,
                                double epsilon,
                                uint64_t seed,
                                size_t shifts,
                                struct TspnTour **out);

// Exact optimum, for at most `TSPN_ORACLE_MAX_N` segments.
//
// # Safety
// `inst` must be a live instance handle and `out` writable.
enum TspnStatus tspn_exact_oracle(const struct TspnInstance *inst, struct TspnTour **out);

// Tour length; NaN for a null handle.
//
// # Safety
// `tour` must be null or a live tour handle.
double tspn_tour_cost(const struct TspnTour *tour);

// Number of tour points; 0 for a null handle.
//
// # Safety
// `tour` must be null or a live tour handle.
size_t tspn_tour_len(const struct TspnTour *tour);

// 1 when the scheme's own tour lost to a baseline, else 0.
//
// # Safety
// `tour` must be null or a live tour handle.
int32_t tspn_tour_fallback(const struct TspnTour *tour);

// Point `i` of the tour. `segment` receives the id of the segment the
// point lies on, or -1 for a point bound to none.
//
// # Safety
// `tour` must be a live tour handle; the out pointers must be writable.
enum TspnStatus tspn_tour_point(const struct TspnTour *tour,
                                size_t i,
                                double *x,
                                double *y,
                                int64_t *segment);

// # Safety
// `tour` must be null or a live tour handle, freed at most once.
void tspn_tour_free(struct TspnTour *tour);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* TSPN_H */
