#ifndef BSFREE_BSFREE_H
#define BSFREE_BSFREE_H

/*
 * C interface to the bulk-surface free-boundary library.
 *
 * Conventions:
 *   - Every fallible call returns a bsf_status; BSF_OK is zero.
 *   - On failure, bsf_last_error() returns a message for the calling thread
 *     that stays valid until that thread's next library call.
 *   - Strings returned through char** are heap allocated by the library and
 *     must be released with bsf_string_free.
 *   - Handles are released with their matching *_free function; passing NULL
 *     to a free function is a no-op.
 */

#include <stddef.h>

#if defined(_WIN32)
#if defined(BSFREE_BUILDING_LIBRARY)
#define BSF_API __declspec(dllexport)
#else
#define BSF_API __declspec(dllimport)
#endif
#else
#define BSF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bsf_status {
  BSF_OK = 0,
  BSF_ERR_INVALID_ARGUMENT = 1,
  BSF_ERR_CONFIG = 2,
  BSF_ERR_MESH = 3,
  BSF_ERR_ASSEMBLY = 4,
  BSF_ERR_SOLVER = 5,
  BSF_ERR_IO = 6,
  BSF_ERR_INTERNAL = 7
} bsf_status;

typedef struct bsf_mesh bsf_mesh;

typedef struct bsf_mesh_stats {
  size_t vertices;
  size_t triangles;
  size_t edges;
  size_t surface_nodes;
  size_t outer_nodes;
  size_t loops;
  double area;
  double surface_length;
  double max_edge_length;
  double min_angle_deg;
  double max_angle_deg;
} bsf_mesh_stats;

typedef struct bsf_model {
  double delta_omega;
  double delta_gamma;
  double delta_k;
  double mu;
  double u_dirichlet;
  int neumann; /* nonzero: homogeneous Neumann outer boundary */
} bsf_model;

BSF_API const char* bsf_version(void);
BSF_API const char* bsf_status_string(bsf_status status);
BSF_API const char* bsf_last_error(void);
BSF_API void bsf_string_free(char* s);

/* Meshes */
BSF_API bsf_status bsf_mesh_generate_annulus(double r_inner, double r_outer, int n_angular, int n_radial,
                                             double grading, bsf_mesh** out);
BSF_API bsf_status bsf_mesh_import(const char* text, bsf_mesh** out);
BSF_API bsf_status bsf_mesh_import_file(const char* path, bsf_mesh** out);
BSF_API bsf_status bsf_mesh_export(const bsf_mesh* mesh, char** text_out);
BSF_API bsf_status bsf_mesh_export_file(const bsf_mesh* mesh, const char* path);
/* Red refinement. With project != 0 new surface midpoints are moved onto the
 * circle (cx, cy, radius). */
BSF_API bsf_status bsf_mesh_refine(const bsf_mesh* mesh, int project, double cx, double cy, double radius,
                                   bsf_mesh** out);
BSF_API bsf_status bsf_mesh_stats_get(const bsf_mesh* mesh, bsf_mesh_stats* stats);
/* Copies interleaved x,y pairs; capacity counts doubles. */
BSF_API bsf_status bsf_mesh_vertices(const bsf_mesh* mesh, double* xy, size_t capacity);
BSF_API bsf_status bsf_mesh_surface_nodes(const bsf_mesh* mesh, size_t* ids, size_t capacity);
BSF_API void bsf_mesh_free(bsf_mesh* mesh);

/* Solvers */
BSF_API bsf_model bsf_model_default(void);
BSF_API bsf_status bsf_stable_timestep(const bsf_mesh* mesh, const bsf_model* model, double u_max, double w_max,
                                       double* tau_out);
/* Elliptic obstacle problem at time t with load v0 (surface nodes). z_out
 * receives bulk values; multiplier_out (optional) the surface multiplier. */
BSF_API bsf_status bsf_solve_evi(const bsf_mesh* mesh, double t, double u_dirichlet, const double* v0,
                                 size_t n_surface, double* z_out, size_t n_bulk, double* multiplier_out,
                                 int* sweeps_out);
/* Free-boundary arcs of a bulk field as CSV (loop_id,theta_start,theta_end,arclength). */
BSF_API bsf_status bsf_extract_free_boundary(const bsf_mesh* mesh, const double* z_bulk, size_t n_bulk,
                                             double threshold, char** csv_out);
/* Same, reading z from a VI CSV file written by an evi/pvi run. */
BSF_API bsf_status bsf_free_boundary_from_vi_file(const bsf_mesh* mesh, const char* vi_csv_path, double threshold,
                                                  char** csv_out);

/* Experiments */
/* Newline-separated preset names. */
BSF_API bsf_status bsf_preset_names(char** out);
BSF_API bsf_status bsf_preset_config(const char* name, char** json_out);
/* Parses and validates a config; returns its canonical echo. */
BSF_API bsf_status bsf_config_echo(const char* config_json, char** json_out);
/* Runs an experiment and writes its artifact directory. kind_override may be
 * NULL; otherwise it replaces the config's kind. summary_json_out may be NULL. */
BSF_API bsf_status bsf_run_experiment(const char* config_json, const char* kind_override, const char* out_dir,
                                      int threads, char** summary_json_out);
/* Compares two run directories (each holding mesh.txt and snapshots.csv).
 * Run B's mesh must equal or refine run A's. Report CSV via report_csv_out. */
BSF_API bsf_status bsf_compare_runs(const char* run_a_dir, const char* run_b_dir, const double* times,
                                    size_t n_times, char** report_csv_out);

#ifdef __cplusplus
}
#endif

#endif /* BSFREE_BSFREE_H */
