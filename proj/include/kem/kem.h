/* C interface to the kem library.
 *
 * Every function returning kem_status leaves a message for kem_last_error()
 * on failure (per thread). Strings returned through char** are owned by the
 * caller and released with kem_string_free. */
#ifndef KEM_KEM_H
#define KEM_KEM_H

#include <stddef.h>
#include <stdint.h>

#if defined(KEM_BUILDING)
#define KEM_API __attribute__((visibility("default")))
#else
#define KEM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  KEM_OK = 0,
  KEM_E_INVALID = 1,  /* malformed argument or request */
  KEM_E_DOMAIN = 2,   /* outside the domain of a formula (singular endpoint, degenerate orbit) */
  KEM_E_COMPUTE = 3,  /* numerical failure */
  KEM_E_INTERNAL = 4
} kem_status;

KEM_API const char* kem_version(void);
KEM_API const char* kem_last_error(void);
KEM_API void kem_string_free(char* s);
KEM_API uint64_t kem_fnv1a64(const char* data, size_t len);

/* ---- scenario drivers ----
 * command: "bianchi.solve", "e2.shoot", "e2.diagnose", "e2.bolt", "e2.einstein",
 * "pde.leaf_build", "pde.profile", "pde.construct", "pde.verify", "check.algebra".
 * result: {"status": 0|2|3, "report": {...}, "artifacts": [{"name", "content"}]}
 * status 2 means an expected early termination, 3 a failed verification. */
KEM_API kem_status kem_run(const char* command, const char* request_json, char** result_json);
/* newline-separated command names */
KEM_API kem_status kem_commands(char** out);

/* ---- frame algebra ---- */
typedef struct {
  double A, B, C, D, E, F, G, H, L, N;
} kem_frame;

typedef struct {
  double P, Q, R, S, L, N;
  int has_S; /* 0 on the shear-free locus R = 0 */
} kem_pqrs;

KEM_API kem_status kem_to_pqrs(const kem_frame* f, kem_pqrs* out);
KEM_API kem_status kem_from_pqrs(const kem_pqrs* s, kem_frame* out);
KEM_API kem_status kem_kahler_residuals(const kem_frame* f, double out[4]);
KEM_API kem_status kem_sys_rhs(const kem_pqrs* s, double out[5]);
KEM_API kem_status kem_lambda_constraint(const kem_pqrs* s, double* out);

/* ---- cohomogeneity-one flows ---- */
typedef struct {
  double p1, p2, p3, lambda;
  double alpha0;
  int has_alpha0; /* required iff p3 == 0 */
} kem_bianchi_params;

KEM_API kem_status kem_abc_rhs(const kem_bianchi_params* p, double a, double b, double c, double out[3]);
KEM_API kem_status kem_e2_rhs(double a, double b, double c, double out[3]);
/* eigenvalues (descending) and unit unstable eigenvector at (q, 0, q) */
KEM_API kem_status kem_e2_linearization(double q, double eigenvalues[3], double unstable[3]);

typedef enum { KEM_STOP_COMPLETED = 0, KEM_STOP_TARGET = 1, KEM_STOP_BLOW_UP = 2, KEM_STOP_POSITIVITY_LOST = 3 } kem_stop;

typedef struct kem_trajectory kem_trajectory;

/* state = (t, a, b, c) */
KEM_API kem_status kem_bianchi_integrate(const kem_bianchi_params* p, const double state[4], double t_end, double tol,
                                         kem_trajectory** out);
/* b_max <= 0 means no b stop; the run then ends at blow-up */
KEM_API kem_status kem_e2_shoot(double q, double eps, double b_max, double tol, kem_trajectory** out);
KEM_API kem_status kem_trajectory_from_csv(const char* csv, kem_trajectory** out);
KEM_API kem_status kem_trajectory_to_csv(const kem_trajectory* tr, char** out);
KEM_API size_t kem_trajectory_size(const kem_trajectory* tr);
KEM_API kem_status kem_trajectory_sample(const kem_trajectory* tr, size_t i, double out[4]);
KEM_API kem_stop kem_trajectory_stop(const kem_trajectory* tr);
KEM_API void kem_trajectory_free(kem_trajectory* tr);

/* ---- sampled metrics ---- */
typedef struct kem_metric kem_metric;

KEM_API kem_status kem_metric_from_json(const char* json, kem_metric** out);
KEM_API size_t kem_metric_dim(const kem_metric* m);
KEM_API size_t kem_metric_nodes(const kem_metric* m);
KEM_API kem_status kem_metric_einstein_residual(const kem_metric* m, double lambda, double* out);
KEM_API kem_status kem_metric_max_riemann(const kem_metric* m, double* out);
KEM_API void kem_metric_free(kem_metric* m);

#ifdef __cplusplus
}
#endif

#endif
