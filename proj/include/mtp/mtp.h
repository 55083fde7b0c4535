#ifndef MTP_H
#define MTP_H

/* C interface of the manifold turnpike toolkit.
 *
 * Handles are opaque. Every function returning int reports an MTP_* code;
 * mtp_last_error() holds the message of the last failure on the calling
 * thread. Strings handed out through char** are released with
 * mtp_string_free(). */

#include <stddef.h>

#if defined(_WIN32)
#define MTP_API __declspec(dllexport)
#else
#define MTP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum {
  MTP_OK = 0,
  MTP_E_INVALID_ARGUMENT = 1,
  MTP_E_UNKNOWN_PRESET = 2,
  MTP_E_DOMAIN = 3,
  MTP_E_NOT_CONVERGED = 4,
  MTP_E_IO = 5,
  MTP_E_PARSE = 6,
  MTP_E_INTERNAL = 7
};

typedef struct mtp_config mtp_config;
typedef struct mtp_solution mtp_solution;

typedef struct {
  int converged;
  int iterations;
  int nodes;
  int control_dim;
  double objective;
  double stationarity;
  double feasibility;
  double complementarity;
  double max_defect;
  double seconds;
} mtp_summary;

MTP_API const char* mtp_version(void);
MTP_API const char* mtp_last_error(void);
MTP_API void mtp_string_free(char* s);

/* Names of the built-in presets, comma separated (static storage). */
MTP_API const char* mtp_preset_names(void);

/* Experiment configuration. */
MTP_API int mtp_config_new(const char* preset, mtp_config** out);
MTP_API int mtp_config_from_json(const char* json, mtp_config** out);
MTP_API void mtp_config_free(mtp_config* cfg);
MTP_API int mtp_config_set_out(mtp_config* cfg, const char* dir);
MTP_API int mtp_config_set_horizon(mtp_config* cfg, double horizon);
MTP_API int mtp_config_set_tol(mtp_config* cfg, double tol);
MTP_API int mtp_config_set_max_iter(mtp_config* cfg, int max_iter);
/* name: nco_check, tocp, sop, turnpike_scan, dissipativity */
MTP_API int mtp_config_set_flag(mtp_config* cfg, const char* name, int on);
MTP_API int mtp_config_set_scan(mtp_config* cfg, const double* horizons, int n, double epsilon);
MTP_API int mtp_config_set_dissipativity(mtp_config* cfg, const double* horizons, int n, double w);
MTP_API int mtp_config_set_nco_window(mtp_config* cfg, double from, double to);
/* unknown: shape, cyclic_velocity or control; u may be NULL (zero control). */
MTP_API int mtp_config_set_trim(mtp_config* cfg, const char* unknown, double s, double v_theta, const double* u, int m,
                                int control_index, double guess);
/* Resolved OCP specification as JSON. */
MTP_API int mtp_config_spec_json(const mtp_config* cfg, char** out_json);

/* Optimal control solve without writing files. */
MTP_API int mtp_solve(const mtp_config* cfg, mtp_solution** out);
MTP_API void mtp_solution_free(mtp_solution* sol);
MTP_API int mtp_solution_summary(const mtp_solution* sol, mtp_summary* out);
/* x and lam hold 4 entries each (s, v_s, theta, v_theta); lam may be NULL. */
MTP_API int mtp_solution_node(const mtp_solution* sol, int i, double* t, double* x, double* lam);
/* Control of interval i (0 <= i < nodes - 1); u holds m entries. */
MTP_API int mtp_solution_control(const mtp_solution* sol, int i, double* u, int m);
MTP_API int mtp_solution_csv(const mtp_solution* sol, char** out_csv);

/* Analyses writing artifacts below the configured output directory.
 * name: solve, trim, sop, nco-check, turnpike-scan, dissipativity, run.
 * "run" returns MTP_E_NOT_CONVERGED (with the summary filled) when the main
 * solve did not converge. */
MTP_API int mtp_analysis(const mtp_config* cfg, const char* name, char** out_json);

#ifdef __cplusplus
}
#endif

#endif
