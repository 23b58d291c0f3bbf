/* Generated by cbindgen. Do not edit. */

#ifndef EKDIFF_H
#define EKDIFF_H

#include <stddef.h>
#include <stdint.h>

typedef enum EkStatus {
  EK_STATUS_OK = 0,
  EK_STATUS_INVALID_ARGUMENT = 1,
  EK_STATUS_NULL_POINTER = 2,
  EK_STATUS_NUMERICAL = 3,
  EK_STATUS_UNSUPPORTED = 4,
  EK_STATUS_BUFFER_TOO_SMALL = 5,
  EK_STATUS_OUT_OF_RANGE = 6,
  EK_STATUS_IO = 7,
  EK_STATUS_PANIC = 8,
} EkStatus;

typedef enum EkTimeRule {
  EK_TIME_RULE_ENDPOINT_AVERAGE = 0,
  EK_TIME_RULE_RIGHT_ENDPOINT = 1,
} EkTimeRule;

// Simulated ggBm paths.
typedef struct EkEnsemble EkEnsemble;

// Solution levels of a run of the solver.
typedef struct EkSolution EkSolution;

// `f(t, user_data)`; used by the EK operators.
typedef double (*EkCallback)(double t, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` as a
// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
// message length without the terminator.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t ek_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *ek_version(void);

// M-Wright function `M_nu(z)` for `0 < nu < 1`.
//
// # Safety
// `out` must be valid for one write.
enum EkStatus ek_mwright(double nu, double z, double *out);

// Green function of the ggBm equation at `(x, t)`.
//
// # Safety
// `out` must be valid for one write.
enum EkStatus ek_green(double alpha, double beta, double x, double t, double *out);

// EK integral `I_eta^{gamma,mu} f` at `t`. The callback runs on the
// calling thread.
//
// # Safety
// `f` must be safe to call with `user_data`; `out` must be valid for one
// write.
enum EkStatus ek_integral(double gamma,
                          double mu,
                          double eta,
                          EkCallback f,
                          void *user_data,
                          double t,
                          double *out);

// EK derivative `D_eta^{gamma,mu} f` at `t`.
//
// # Safety
// As for [`ek_integral`].
enum EkStatus ek_derivative(double gamma,
                            double mu,
                            double eta,
                            EkCallback f,
                            void *user_data,
                            double t,
                            double *out);

// Solves from the Green function at `t0` to `t_end` with `nt` levels on
// `nx` nodes over `[-x_max, x_max]`. A non-positive `t0` or `x_max` picks
// the default.
//
// # Safety
// `out` must be valid for one write. The handle must be released with
// [`ek_solution_free`].
enum EkStatus ek_solve(double alpha,
                       double beta,
                       double t0,
                       double t_end,
                       size_t nt,
                       size_t nx,
                       double x_max,
                       enum EkTimeRule rule,
                       struct EkSolution **out);

// # Safety
// `s` must be null or a handle from [`ek_solve`] not yet freed.
void ek_solution_free(struct EkSolution *s);

// Number of time levels, or 0 for a null handle.
//
// # Safety
// `s` must be null or a live handle.
size_t ek_solution_levels(const struct EkSolution *s);

// Number of spatial nodes, or 0 for a null handle.
//
// # Safety
// `s` must be null or a live handle.
size_t ek_solution_nodes(const struct EkSolution *s);

// # Safety
// `s` must be null or a live handle; `out` valid for one write.
enum EkStatus ek_solution_time(const struct EkSolution *s, size_t level, double *out);

// Copies the node positions into `buf`.
//
// # Safety
// `s` must be null or a live handle; `buf` valid for `len` writes.
enum EkStatus ek_solution_nodes_x(const struct EkSolution *s, double *buf, size_t len);

// Copies the values of one level into `buf`.
//
// # Safety
// `s` must be null or a live handle; `buf` valid for `len` writes.
enum EkStatus ek_solution_values(const struct EkSolution *s, size_t level, double *buf, size_t len);

// Simulates `n_paths` ggBm paths at the `n_times` given times.
//
// # Safety
// `times` must be valid for `n_times` reads and `out` for one write. The
// handle must be released with [`ek_ensemble_free`].
enum EkStatus ek_simulate(double alpha,
                          double beta,
                          const double *times,
                          size_t n_times,
                          size_t n_paths,
                          uint64_t seed,
                          struct EkEnsemble **out);

// # Safety
// `e` must be null or a handle from [`ek_simulate`] not yet freed.
void ek_ensemble_free(struct EkEnsemble *e);

// # Safety
// `e` must be null or a live handle.
size_t ek_ensemble_paths(const struct EkEnsemble *e);

// Copies the time-change draws, one per path, into `buf`.
//
// # Safety
// `e` must be null or a live handle; `buf` valid for `len` writes.
enum EkStatus ek_ensemble_tau(const struct EkEnsemble *e, double *buf, size_t len);

// Copies path `index` at every time node into `buf`.
//
// # Safety
// `e` must be null or a live handle; `buf` valid for `len` writes.
enum EkStatus ek_ensemble_path(const struct EkEnsemble *e, size_t index, double *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EKDIFF_H */
