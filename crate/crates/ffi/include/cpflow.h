#ifndef CPFLOW_H
#define CPFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CpfStatus {
  CPF_STATUS_OK = 0,
  CPF_STATUS_NULL_POINTER = 1,
  CPF_STATUS_INVALID_ARGUMENT = 2,
  CPF_STATUS_CONFIG = 3,
  CPF_STATUS_NUMERICAL = 4,
  CPF_STATUS_IO = 5,
  CPF_STATUS_OUT_OF_RANGE = 6,
  CPF_STATUS_PANIC = 7,
} CpfStatus;

/**
 * Material model handle.
 */
typedef struct CpfMaterial CpfMaterial;

/**
 * Point trajectory handle.
 */
typedef struct CpfTrajectory CpfTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread, NUL-terminated and
 * truncated to `len` bytes. Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t cpf_last_error(char *buf, size_t len);

/**
 * Default material: neo-Hookean elasticity, log-quadratic hardening.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum CpfStatus cpf_material_new_default(struct CpfMaterial **out);

/**
 * Material from a JSON object with the library's material schema.
 *
 * # Safety
 * `json` must be null or a NUL-terminated string; `out` null or writable.
 */
enum CpfStatus cpf_material_from_json(const char *json, struct CpfMaterial **out);

/**
 * # Safety
 * `m` must be null or a handle from this library, not yet freed.
 */
void cpf_material_free(struct CpfMaterial *m);

/**
 * `W(C, Cp)`; `Cp` must have unit determinant.
 *
 * # Safety
 * Tensor pointers must reference six doubles; `out` one.
 */
enum CpfStatus cpf_total_density(const struct CpfMaterial *m,
                                 const double *c,
                                 const double *cp,
                                 double *out);

/**
 * Second Piola–Kirchhoff stress `2 ∂W/∂C`.
 *
 * # Safety
 * Tensor pointers must reference six doubles.
 */
enum CpfStatus cpf_pk2_stress(const struct CpfMaterial *m,
                              const double *c,
                              const double *cp,
                              double *out);

/**
 * Thermodynamic driving force conjugate to `Cp`.
 *
 * # Safety
 * Tensor pointers must reference six doubles.
 */
enum CpfStatus cpf_driving_force(const struct CpfMaterial *m,
                                 const double *c,
                                 const double *cp,
                                 double *out);

/**
 * Dissipation distance between two plastic strains at yield radius `radius`.
 *
 * # Safety
 * Tensor pointers must reference six doubles; `out` one.
 */
enum CpfStatus cpf_distance(double radius, const double *cp1, const double *cp2, double *out);

/**
 * Isotropic small-strain return map; `z_prev` and the result are traceless.
 *
 * # Safety
 * Tensor pointers must reference six doubles.
 */
enum CpfStatus cpf_linear_return_map(double shear,
                                     double lame,
                                     double hardening,
                                     double rho,
                                     const double *z_prev,
                                     const double *strain,
                                     double *out);

/**
 * Energetic point solve of a strain program given as JSON, from `Cp = I`.
 *
 * # Safety
 * `program_json` must be a NUL-terminated string; `out` writable.
 */
enum CpfStatus cpf_point_solve(const struct CpfMaterial *m,
                               const char *program_json,
                               size_t steps,
                               uint64_t seed,
                               struct CpfTrajectory **out);

/**
 * Number of recorded times, `steps + 1`.
 *
 * # Safety
 * `t` must be a live trajectory handle; `out` writable.
 */
enum CpfStatus cpf_trajectory_len(const struct CpfTrajectory *t, size_t *out);

/**
 * Time, energy and cumulative dissipation at record `i`, and `Cp` into `cp`.
 *
 * # Safety
 * `t` must be a live handle; `time`, `energy`, `dissipation` one double each,
 * `cp` six doubles.
 */
enum CpfStatus cpf_trajectory_record(const struct CpfTrajectory *t,
                                     size_t i,
                                     double *time,
                                     double *energy,
                                     double *dissipation,
                                     double *cp);

/**
 * Energy-balance residual of the whole trajectory.
 *
 * # Safety
 * `t` must be a live handle; `out` writable.
 */
enum CpfStatus cpf_trajectory_balance_residual(const struct CpfTrajectory *t, double *out);

/**
 * Writes the trajectory CSV to `path`.
 *
 * # Safety
 * `t` must be a live handle; `path` a NUL-terminated string.
 */
enum CpfStatus cpf_trajectory_write_csv(const struct CpfTrajectory *t, const char *path);

/**
 * # Safety
 * `t` must be null or a handle from this library, not yet freed.
 */
void cpf_trajectory_free(struct CpfTrajectory *t);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPFLOW_H */
