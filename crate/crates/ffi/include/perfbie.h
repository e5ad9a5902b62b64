#ifndef PERFBIE_H
#define PERFBIE_H

#include <stddef.h>
#include <stdint.h>

typedef enum PerfbieStatus {
  PERFBIE_STATUS_OK = 0,
  PERFBIE_STATUS_NULL_POINTER = 1,
  PERFBIE_STATUS_INVALID_ARGUMENT = 2,
  PERFBIE_STATUS_INVALID_CONFIG = 3,
  PERFBIE_STATUS_GEOMETRY = 4,
  PERFBIE_STATUS_SINGULAR_SYSTEM = 5,
  PERFBIE_STATUS_TARGET_REJECTED = 6,
  PERFBIE_STATUS_IO = 7,
  PERFBIE_STATUS_INTERNAL = 8,
} PerfbieStatus;

// A validated configuration with its parameter-independent operators.
typedef struct PerfbieProblem PerfbieProblem;

// Densities at one parameter pair and the field they define.
typedef struct PerfbieSolution PerfbieSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *perfbie_version(void);

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *perfbie_last_error_message(void);

// The built-in two-hole configuration, with `nodes` per curve (0 keeps 128).
//
// # Safety
// `out` must be valid for a pointer write.
enum PerfbieStatus perfbie_problem_default(size_t nodes, struct PerfbieProblem **out);

// Parses a JSON configuration.
//
// # Safety
// `json` must be a NUL-terminated string and `out` valid for a pointer write.
enum PerfbieStatus perfbie_problem_from_json(const char *json, struct PerfbieProblem **out);

// # Safety
// `problem` must come from a `perfbie_problem_*` constructor, or be null.
void perfbie_problem_free(struct PerfbieProblem *problem);

// Nodes per curve, or 0 for a null handle.
//
// # Safety
// `problem` must be a live handle or null.
size_t perfbie_problem_nodes(const struct PerfbieProblem *problem);

// Solves at `(rho1, rho2)`.
//
// # Safety
// `problem` must be a live handle and `out` valid for a pointer write.
enum PerfbieStatus perfbie_solve(const struct PerfbieProblem *problem,
                                 double rho1,
                                 double rho2,
                                 struct PerfbieSolution **out);

// # Safety
// `solution` must come from [`perfbie_solve`], or be null.
void perfbie_solution_free(struct PerfbieSolution *solution);

// Field value at `(x, y)`; targets in holes, outside the domain or within
// a guard band are rejected.
//
// # Safety
// `solution` must be a live handle and `value` valid for a write.
enum PerfbieStatus perfbie_solution_eval(const struct PerfbieSolution *solution,
                                         double x,
                                         double y,
                                         double *value);

// 1-norm condition number of the solved system.
//
// # Safety
// `solution` must be a live handle and `value` valid for a write.
enum PerfbieStatus perfbie_solution_condition(const struct PerfbieSolution *solution,
                                              double *value);

// `integral theta_j - integral f_j` for hole `j` (1 or 2).
//
// # Safety
// `solution` must be a live handle and `value` valid for a write.
enum PerfbieStatus perfbie_solution_flux_defect(const struct PerfbieSolution *solution,
                                                uint32_t j,
                                                double *value);

// Copies the densities `theta_1, theta_2, theta_o` (each `M` values) and
// `xi` into `buffer`, which must hold `3 M + 1` doubles.
//
// # Safety
// `solution` must be a live handle and `buffer` valid for `len` writes.
enum PerfbieStatus perfbie_solution_densities(const struct PerfbieSolution *solution,
                                              double *buffer,
                                              size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERFBIE_H */
