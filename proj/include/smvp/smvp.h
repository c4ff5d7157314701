#ifndef SMVP_SMVP_H
#define SMVP_SMVP_H

/* C interface to the smvp penalized minimum-variance portfolio library.
 *
 * Objects are opaque handles created by smvp_*_create / _read / _run
 * functions and released with the matching _free function (NULL is
 * accepted). Every fallible call returns an smvp_status; on failure
 * smvp_last_error() describes the problem for the calling thread until its
 * next failing call. Strings returned by getters are owned by the handle. */

#include <stddef.h>
#include <stdint.h>

#if defined(SMVP_BUILDING_LIBRARY)
#define SMVP_API __attribute__((visibility("default")))
#else
#define SMVP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum smvp_status {
  SMVP_OK = 0,
  SMVP_INVALID_ARGUMENT = 1,
  SMVP_DATA = 2,
  SMVP_NOT_CONVERGED = 3, /* output is still produced */
  SMVP_DEGENERATE = 4,    /* zero-curvature asset or singular block */
  SMVP_IO = 5,
  SMVP_INTERNAL = 6
} smvp_status;

typedef struct smvp_panel smvp_panel;
typedef struct smvp_covariance smvp_covariance;
typedef struct smvp_penalty smvp_penalty;
typedef struct smvp_solution smvp_solution;
typedef struct smvp_sweep_result smvp_sweep_result;
typedef struct smvp_report smvp_report;

SMVP_API const char* smvp_last_error(void);
SMVP_API const char* smvp_version(void);
SMVP_API const char* smvp_status_name(smvp_status status);

/* ---- return panels ---------------------------------------------------- */

typedef enum smvp_units { SMVP_UNITS_PERCENT = 0, SMVP_UNITS_FRACTION = 1 } smvp_units;

typedef struct smvp_ingest_options {
  const double* missing_markers; /* NULL: -99.99 and -999 */
  size_t n_missing_markers;
  int impute;       /* nonzero: fill missing cells with the row mean */
  smvp_units units; /* a "# units:" line in the file takes precedence */
} smvp_ingest_options;

SMVP_API void smvp_ingest_options_init(smvp_ingest_options* opts);
SMVP_API smvp_status smvp_panel_read(const char* path, const smvp_ingest_options* opts,
                                     smvp_panel** out);
SMVP_API smvp_status smvp_panel_write(const smvp_panel* panel, const char* path);
/* `returns` is T x p row-major in fractions; NaN marks a missing cell. */
SMVP_API smvp_status smvp_panel_create(size_t periods, size_t assets, const int64_t* dates,
                                       const char* const* asset_ids, const double* returns,
                                       smvp_panel** out);
SMVP_API smvp_status smvp_panel_impute(const smvp_panel* panel, smvp_panel** out);
SMVP_API void smvp_panel_free(smvp_panel* panel);
SMVP_API size_t smvp_panel_periods(const smvp_panel* panel);
SMVP_API size_t smvp_panel_assets(const smvp_panel* panel);
SMVP_API int64_t smvp_panel_date(const smvp_panel* panel, size_t t);
SMVP_API const char* smvp_panel_asset_id(const smvp_panel* panel, size_t i);
SMVP_API double smvp_panel_return(const smvp_panel* panel, size_t t, size_t i);
SMVP_API int smvp_panel_is_missing(const smvp_panel* panel, size_t t, size_t i);
SMVP_API size_t smvp_panel_missing_count(const smvp_panel* panel);

/* ---- covariance ------------------------------------------------------- */

typedef enum smvp_divisor { SMVP_DIVISOR_UNBIASED = 0, SMVP_DIVISOR_POPULATION = 1 } smvp_divisor;

/* `values` is p x p row-major; `asset_ids` may be NULL. */
SMVP_API smvp_status smvp_covariance_create(size_t p, const double* values,
                                            const char* const* asset_ids, smvp_covariance** out);
SMVP_API smvp_status smvp_covariance_read(const char* path, smvp_covariance** out);
SMVP_API smvp_status smvp_covariance_write(const smvp_covariance* cov, const char* path);
/* Sample covariance of rows [start, start + length), times `scale`. */
SMVP_API smvp_status smvp_covariance_from_panel(const smvp_panel* panel, size_t start,
                                                size_t length, smvp_divisor divisor,
                                                double scale, smvp_covariance** out);
SMVP_API void smvp_covariance_free(smvp_covariance* cov);
SMVP_API size_t smvp_covariance_dim(const smvp_covariance* cov);
SMVP_API double smvp_covariance_get(const smvp_covariance* cov, size_t i, size_t j);
SMVP_API const char* smvp_covariance_asset_id(const smvp_covariance* cov, size_t i);

/* ---- penalties -------------------------------------------------------- */

SMVP_API smvp_status smvp_penalty_elastic_net(double lambda, double alpha, smvp_penalty** out);
SMVP_API smvp_status smvp_penalty_mean_variance(double lambda, double alpha, double tau,
                                                const double* mu, size_t p, smvp_penalty** out);
SMVP_API smvp_status smvp_penalty_weighted_l1(double lambda, const double* eta, size_t p,
                                              smvp_penalty** out);
SMVP_API smvp_status smvp_penalty_berhu(double lambda, double delta, smvp_penalty** out);
/* group_of_asset[i] in 0..L-1, every label used. */
SMVP_API smvp_status smvp_penalty_adaptive_group(double lambda1, const size_t* group_of_asset,
                                                 size_t p, smvp_penalty** out);
SMVP_API void smvp_penalty_free(smvp_penalty* penalty);
SMVP_API const char* smvp_penalty_family(const smvp_penalty* penalty);

/* Group file (one group per line, comma-separated ids) to per-asset labels. */
SMVP_API smvp_status smvp_read_grouping(const char* path, const char* const* asset_ids, size_t p,
                                        size_t* group_of_asset);
/* "asset,value" file to a p-vector ordered like asset_ids. */
SMVP_API smvp_status smvp_read_asset_values(const char* path, const char* const* asset_ids,
                                            size_t p, double* values);

/* ---- solving ---------------------------------------------------------- */

typedef struct smvp_solver_options {
  size_t max_sweeps;
  double coord_tol;
  double budget_tol;
  double kkt_tol;
} smvp_solver_options;

SMVP_API void smvp_solver_options_init(smvp_solver_options* opts);

/* Returns SMVP_NOT_CONVERGED with *out set when the iteration cap is hit. */
SMVP_API smvp_status smvp_solve(const smvp_covariance* cov, const smvp_penalty* penalty,
                                const smvp_solver_options* opts, smvp_solution** out);
SMVP_API smvp_status smvp_solve_no_shortsale(const smvp_covariance* cov, smvp_solution** out);
/* Independent reference minimizer, p <= 16. */
SMVP_API smvp_status smvp_solve_reference(const smvp_covariance* cov, const smvp_penalty* penalty,
                                          smvp_solution** out);
SMVP_API void smvp_solution_free(smvp_solution* sol);
SMVP_API size_t smvp_solution_dim(const smvp_solution* sol);
SMVP_API const double* smvp_solution_weights(const smvp_solution* sol);
SMVP_API double smvp_solution_gamma(const smvp_solution* sol);
SMVP_API size_t smvp_solution_iterations(const smvp_solution* sol);
SMVP_API int smvp_solution_converged(const smvp_solution* sol);
SMVP_API double smvp_solution_objective(const smvp_solution* sol);
SMVP_API double smvp_solution_kkt_residual(const smvp_solution* sol);

SMVP_API smvp_status smvp_objective(const smvp_covariance* cov, const smvp_penalty* penalty,
                                    const double* w, size_t p, double* out);

/* ---- grid sweeps ------------------------------------------------------ */

/* The second axis is alpha (elastic net, mean-variance) or delta (berhu);
 * other families take a single dummy value 0. */
SMVP_API smvp_status smvp_sweep(const smvp_covariance* cov, const smvp_penalty* base,
                                const double* lambdas, size_t n_lambdas, const double* params,
                                size_t n_params, const smvp_solver_options* opts, size_t threads,
                                smvp_sweep_result** out);
SMVP_API smvp_status smvp_sweep_write(const smvp_sweep_result* res, const char* dir);
SMVP_API void smvp_sweep_free(smvp_sweep_result* res);
SMVP_API size_t smvp_sweep_points(const smvp_sweep_result* res);
SMVP_API size_t smvp_sweep_failures(const smvp_sweep_result* res);
SMVP_API size_t smvp_sweep_nonconverged(const smvp_sweep_result* res);

/* ---- backtests -------------------------------------------------------- */

typedef enum smvp_strategy {
  SMVP_STRATEGY_PENALIZED = 0,
  SMVP_STRATEGY_EQUAL_WEIGHT = 1,
  SMVP_STRATEGY_NO_SHORTSALE = 2
} smvp_strategy;

typedef enum smvp_series {
  SMVP_SERIES_RETURNS = 0,
  SMVP_SERIES_TURNOVER = 1,
  SMVP_SERIES_PAC = 2,
  SMVP_SERIES_APS = 3,
  SMVP_SERIES_GAMMA = 4,
  SMVP_SERIES_FEES = 5
} smvp_series;

typedef struct smvp_backtest_options {
  size_t window;
  smvp_solver_options solver;
  smvp_divisor divisor;
  double covariance_scale; /* 1e4: percent-squared covariance */
  int warm_start;
  size_t threads;
  double active_tol;
  double fee_rate;
} smvp_backtest_options;

SMVP_API void smvp_backtest_options_init(smvp_backtest_options* opts);

/* `penalty` is required for SMVP_STRATEGY_PENALIZED and ignored otherwise.
 * Returns SMVP_NOT_CONVERGED with *out set if any date failed to converge
 * or had its weights carried forward. */
SMVP_API smvp_status smvp_backtest_run(const smvp_panel* panel, smvp_strategy strategy,
                                       const smvp_penalty* penalty,
                                       const smvp_backtest_options* opts, smvp_report** out);
SMVP_API smvp_status smvp_report_write(const smvp_report* rep, const char* dir);
SMVP_API smvp_status smvp_report_read(const char* dir, smvp_report** out);
SMVP_API void smvp_report_free(smvp_report* rep);
SMVP_API const char* smvp_report_summary_json(const smvp_report* rep);
SMVP_API size_t smvp_report_dates(const smvp_report* rep);
SMVP_API size_t smvp_report_assets(const smvp_report* rep);
SMVP_API int64_t smvp_report_date(const smvp_report* rep, size_t k);
SMVP_API double smvp_report_weight(const smvp_report* rep, size_t k, size_t i);
/* Copies the series into out[0 .. dates). */
SMVP_API smvp_status smvp_report_series(const smvp_report* rep, smvp_series which, double* out);
SMVP_API double smvp_report_median(const smvp_report* rep, smvp_series which);
SMVP_API double smvp_report_oos_variance(const smvp_report* rep);
SMVP_API double smvp_report_sharpe(const smvp_report* rep);
SMVP_API int smvp_report_converged(const smvp_report* rep, size_t k);
SMVP_API int smvp_report_carried_forward(const smvp_report* rep, size_t k);

#ifdef __cplusplus
}
#endif

#endif /* SMVP_SMVP_H */
