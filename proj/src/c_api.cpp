#include "smvp/smvp.h"

#include <cmath>
#include <limits>
#include <string>

#include "smvp/backtest.hpp"
#include "smvp/cd_solver.hpp"
#include "smvp/covariance.hpp"
#include "smvp/io.hpp"
#include "smvp/oracle.hpp"
#include "smvp/solve.hpp"
#include "smvp/sweep.hpp"

struct smvp_panel {
  smvp::ReturnsPanel value;
};
struct smvp_covariance {
  smvp::CovarianceMatrix value;
};
struct smvp_penalty {
  smvp::PenaltyConfig value;
  std::string family;
};
struct smvp_solution {
  smvp::Solution value;
};
struct smvp_sweep_result {
  std::vector<smvp::SweepPoint> points;
  std::vector<std::string> asset_ids;
};
struct smvp_report {
  smvp::BacktestReport value;
  std::string summary;
};

namespace {

thread_local std::string last_error;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

smvp_status fail(smvp_status status, const std::string& what) {
  last_error = what;
  return status;
}

template <class F>
smvp_status guard(F&& body) {
  try {
    return body();
  } catch (const smvp::DegenerateAssetError& e) {
    return fail(SMVP_DEGENERATE, e.what());
  } catch (const smvp::IllConditionedError& e) {
    return fail(SMVP_DEGENERATE, e.what());
  } catch (const smvp::InvalidArgument& e) {
    return fail(SMVP_INVALID_ARGUMENT, e.what());
  } catch (const smvp::DataError& e) {
    return fail(SMVP_DATA, e.what());
  } catch (const smvp::IoError& e) {
    return fail(SMVP_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(SMVP_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SMVP_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SMVP_INTERNAL, e.what());
  } catch (...) {
    return fail(SMVP_INTERNAL, "unknown error");
  }
}

#define SMVP_REQUIRE(cond)                                                  \
  do {                                                                      \
    if (!(cond)) return fail(SMVP_INVALID_ARGUMENT, "null argument: " #cond); \
  } while (0)

std::vector<std::string> id_vector(const char* const* ids, std::size_t p) {
  std::vector<std::string> out;
  if (!ids) return out;
  for (std::size_t i = 0; i < p; ++i) {
    if (!ids[i]) throw smvp::InvalidArgument("asset id " + std::to_string(i) + " is null");
    out.emplace_back(ids[i]);
  }
  return out;
}

smvp::Vector copy_vector(const double* data, std::size_t n) {
  smvp::Vector v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = data[i];
  return v;
}

smvp::SolverOptions to_cpp(const smvp_solver_options* opts) {
  smvp::SolverOptions o;
  if (opts) {
    o.max_sweeps = opts->max_sweeps;
    o.coord_tol = opts->coord_tol;
    o.budget_tol = opts->budget_tol;
    o.kkt_tol = opts->kkt_tol;
  }
  return o;
}

smvp::Divisor to_cpp(smvp_divisor d) {
  if (d == SMVP_DIVISOR_UNBIASED) return smvp::Divisor::Unbiased;
  if (d == SMVP_DIVISOR_POPULATION) return smvp::Divisor::Population;
  throw smvp::InvalidArgument("unknown divisor");
}

smvp_status make_penalty(smvp::PenaltyConfig cfg, std::size_t p, smvp_penalty** out) {
  if (p > 0) smvp::validate(cfg, p);
  auto family = smvp::family_name(cfg);
  *out = new smvp_penalty{std::move(cfg), std::move(family)};
  return SMVP_OK;
}

const smvp::Vector* series_of(const smvp_report* rep, smvp_series which) {
  const auto& r = rep->value;
  switch (which) {
    case SMVP_SERIES_RETURNS:
      return &r.portfolio_returns;
    case SMVP_SERIES_TURNOVER:
      return &r.turnover;
    case SMVP_SERIES_PAC:
      return &r.pac;
    case SMVP_SERIES_APS:
      return &r.aps;
    case SMVP_SERIES_GAMMA:
      return &r.gamma;
    case SMVP_SERIES_FEES:
      return &r.fees;
  }
  return nullptr;
}

}  // namespace

extern "C" {

const char* smvp_last_error(void) { return last_error.c_str(); }

const char* smvp_version(void) { return "0.1.0"; }

const char* smvp_status_name(smvp_status status) {
  switch (status) {
    case SMVP_OK:
      return "ok";
    case SMVP_INVALID_ARGUMENT:
      return "invalid argument";
    case SMVP_DATA:
      return "data error";
    case SMVP_NOT_CONVERGED:
      return "not converged";
    case SMVP_DEGENERATE:
      return "degenerate problem";
    case SMVP_IO:
      return "i/o error";
    case SMVP_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

// ---- panels

void smvp_ingest_options_init(smvp_ingest_options* opts) {
  if (!opts) return;
  opts->missing_markers = nullptr;
  opts->n_missing_markers = 0;
  opts->impute = 1;
  opts->units = SMVP_UNITS_PERCENT;
}

smvp_status smvp_panel_read(const char* path, const smvp_ingest_options* opts, smvp_panel** out) {
  SMVP_REQUIRE(path && out);
  return guard([&] {
    smvp::io::IngestOptions o;
    if (opts) {
      if (opts->missing_markers)
        o.missing_markers.assign(opts->missing_markers, opts->missing_markers + opts->n_missing_markers);
      o.impute = opts->impute != 0;
      o.units = opts->units == SMVP_UNITS_FRACTION ? smvp::io::Units::Fraction : smvp::io::Units::Percent;
    }
    *out = new smvp_panel{smvp::io::read_panel(std::filesystem::path(path), o)};
    return SMVP_OK;
  });
}

smvp_status smvp_panel_write(const smvp_panel* panel, const char* path) {
  SMVP_REQUIRE(panel && path);
  return guard([&] {
    smvp::io::write_panel(std::filesystem::path(path), panel->value);
    return SMVP_OK;
  });
}

smvp_status smvp_panel_create(size_t periods, size_t assets, const int64_t* dates,
                              const char* const* asset_ids, const double* returns,
                              smvp_panel** out) {
  SMVP_REQUIRE(dates && asset_ids && returns && out);
  return guard([&] {
    std::vector<std::int64_t> d(dates, dates + periods);
    smvp::Matrix r(static_cast<Eigen::Index>(periods), static_cast<Eigen::Index>(assets));
    smvp::Mask m(r.rows(), r.cols());
    for (Eigen::Index t = 0; t < r.rows(); ++t)
      for (Eigen::Index i = 0; i < r.cols(); ++i) {
        const double v = returns[static_cast<std::size_t>(t) * assets + static_cast<std::size_t>(i)];
        m(t, i) = std::isnan(v);
        r(t, i) = v;
      }
    *out = new smvp_panel{smvp::ReturnsPanel(std::move(d), id_vector(asset_ids, assets), std::move(r), std::move(m))};
    return SMVP_OK;
  });
}

smvp_status smvp_panel_impute(const smvp_panel* panel, smvp_panel** out) {
  SMVP_REQUIRE(panel && out);
  return guard([&] {
    *out = new smvp_panel{smvp::impute_missing(panel->value)};
    return SMVP_OK;
  });
}

void smvp_panel_free(smvp_panel* panel) { delete panel; }
size_t smvp_panel_periods(const smvp_panel* panel) { return panel ? panel->value.periods() : 0; }
size_t smvp_panel_assets(const smvp_panel* panel) { return panel ? panel->value.assets() : 0; }

int64_t smvp_panel_date(const smvp_panel* panel, size_t t) {
  if (!panel || t >= panel->value.periods()) return 0;
  return panel->value.dates()[t];
}

const char* smvp_panel_asset_id(const smvp_panel* panel, size_t i) {
  if (!panel || i >= panel->value.assets()) return nullptr;
  return panel->value.asset_ids()[i].c_str();
}

double smvp_panel_return(const smvp_panel* panel, size_t t, size_t i) {
  if (!panel || t >= panel->value.periods() || i >= panel->value.assets()) return kNaN;
  return panel->value.returns()(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));
}

int smvp_panel_is_missing(const smvp_panel* panel, size_t t, size_t i) {
  if (!panel || t >= panel->value.periods() || i >= panel->value.assets()) return 0;
  return panel->value.missing()(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) ? 1 : 0;
}

size_t smvp_panel_missing_count(const smvp_panel* panel) {
  return panel ? static_cast<size_t>(panel->value.missing().count()) : 0;
}

// ---- covariance

smvp_status smvp_covariance_create(size_t p, const double* values, const char* const* asset_ids,
                                   smvp_covariance** out) {
  SMVP_REQUIRE(values && out);
  return guard([&] {
    const auto n = static_cast<Eigen::Index>(p);
    smvp::Matrix s(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) s(r, c) = values[static_cast<std::size_t>(r * n + c)];
    *out = new smvp_covariance{smvp::CovarianceMatrix(std::move(s), id_vector(asset_ids, p))};
    return SMVP_OK;
  });
}

smvp_status smvp_covariance_read(const char* path, smvp_covariance** out) {
  SMVP_REQUIRE(path && out);
  return guard([&] {
    *out = new smvp_covariance{smvp::io::read_covariance(path)};
    return SMVP_OK;
  });
}

smvp_status smvp_covariance_write(const smvp_covariance* cov, const char* path) {
  SMVP_REQUIRE(cov && path);
  return guard([&] {
    smvp::io::write_covariance(path, cov->value);
    return SMVP_OK;
  });
}

smvp_status smvp_covariance_from_panel(const smvp_panel* panel, size_t start, size_t length,
                                       smvp_divisor divisor, double scale, smvp_covariance** out) {
  SMVP_REQUIRE(panel && out);
  return guard([&] {
    auto s = smvp::sample_covariance(panel->value, start, length, to_cpp(divisor));
    if (scale != 1.0) s = s.scaled(scale);
    *out = new smvp_covariance{std::move(s)};
    return SMVP_OK;
  });
}

void smvp_covariance_free(smvp_covariance* cov) { delete cov; }
size_t smvp_covariance_dim(const smvp_covariance* cov) { return cov ? cov->value.dim() : 0; }

double smvp_covariance_get(const smvp_covariance* cov, size_t i, size_t j) {
  if (!cov || i >= cov->value.dim() || j >= cov->value.dim()) return kNaN;
  return cov->value(i, j);
}

const char* smvp_covariance_asset_id(const smvp_covariance* cov, size_t i) {
  if (!cov || i >= cov->value.dim()) return nullptr;
  return cov->value.asset_ids()[i].c_str();
}

// ---- penalties

smvp_status smvp_penalty_elastic_net(double lambda, double alpha, smvp_penalty** out) {
  SMVP_REQUIRE(out);
  return guard([&] { return make_penalty(smvp::ElasticNet{lambda, alpha}, 2, out); });
}

smvp_status smvp_penalty_mean_variance(double lambda, double alpha, double tau, const double* mu,
                                       size_t p, smvp_penalty** out) {
  SMVP_REQUIRE(mu && out);
  return guard([&] {
    return make_penalty(smvp::MeanVariance{lambda, alpha, tau, copy_vector(mu, p)}, p, out);
  });
}

smvp_status smvp_penalty_weighted_l1(double lambda, const double* eta, size_t p, smvp_penalty** out) {
  SMVP_REQUIRE(eta && out);
  return guard([&] { return make_penalty(smvp::WeightedL1{lambda, copy_vector(eta, p)}, p, out); });
}

smvp_status smvp_penalty_berhu(double lambda, double delta, smvp_penalty** out) {
  SMVP_REQUIRE(out);
  return guard([&] { return make_penalty(smvp::Berhu{lambda, delta}, 2, out); });
}

smvp_status smvp_penalty_adaptive_group(double lambda1, const size_t* group_of_asset, size_t p,
                                        smvp_penalty** out) {
  SMVP_REQUIRE(group_of_asset && out);
  return guard([&] {
    auto grouping = smvp::GroupStructure::from_labels(std::span<const std::size_t>(group_of_asset, p));
    return make_penalty(smvp::AdaptiveGroup{lambda1, std::move(grouping), 0.0}, p, out);
  });
}

void smvp_penalty_free(smvp_penalty* penalty) { delete penalty; }

const char* smvp_penalty_family(const smvp_penalty* penalty) {
  return penalty ? penalty->family.c_str() : nullptr;
}

smvp_status smvp_read_grouping(const char* path, const char* const* asset_ids, size_t p,
                               size_t* group_of_asset) {
  SMVP_REQUIRE(path && asset_ids && group_of_asset);
  return guard([&] {
    const auto g = smvp::io::read_grouping(path, id_vector(asset_ids, p));
    for (std::size_t l = 0; l < g.groups(); ++l)
      for (auto i : g.members(l)) group_of_asset[i] = l;
    return SMVP_OK;
  });
}

smvp_status smvp_read_asset_values(const char* path, const char* const* asset_ids, size_t p,
                                   double* values) {
  SMVP_REQUIRE(path && asset_ids && values);
  return guard([&] {
    const auto v = smvp::io::read_asset_values(path, id_vector(asset_ids, p));
    for (std::size_t i = 0; i < p; ++i) values[i] = v(static_cast<Eigen::Index>(i));
    return SMVP_OK;
  });
}

// ---- solving

void smvp_solver_options_init(smvp_solver_options* opts) {
  if (!opts) return;
  const smvp::SolverOptions d;
  opts->max_sweeps = d.max_sweeps;
  opts->coord_tol = d.coord_tol;
  opts->budget_tol = d.budget_tol;
  opts->kkt_tol = d.kkt_tol;
}

smvp_status smvp_solve(const smvp_covariance* cov, const smvp_penalty* penalty,
                       const smvp_solver_options* opts, smvp_solution** out) {
  SMVP_REQUIRE(cov && penalty && out);
  return guard([&] {
    *out = new smvp_solution{smvp::solve_penalized(cov->value, penalty->value, to_cpp(opts))};
    if (!(*out)->value.converged) return fail(SMVP_NOT_CONVERGED, "solver did not converge");
    return SMVP_OK;
  });
}

smvp_status smvp_solve_no_shortsale(const smvp_covariance* cov, smvp_solution** out) {
  SMVP_REQUIRE(cov && out);
  return guard([&] {
    *out = new smvp_solution{smvp::solve_no_shortsale(cov->value)};
    if (!(*out)->value.converged) return fail(SMVP_NOT_CONVERGED, "active set did not verify");
    return SMVP_OK;
  });
}

smvp_status smvp_solve_reference(const smvp_covariance* cov, const smvp_penalty* penalty,
                                 smvp_solution** out) {
  SMVP_REQUIRE(cov && penalty && out);
  return guard([&] {
    *out = new smvp_solution{smvp::solve_generic(cov->value, penalty->value)};
    if (!(*out)->value.converged) return fail(SMVP_NOT_CONVERGED, "reference solve did not verify");
    return SMVP_OK;
  });
}

void smvp_solution_free(smvp_solution* sol) { delete sol; }
size_t smvp_solution_dim(const smvp_solution* sol) {
  return sol ? static_cast<size_t>(sol->value.weights.size()) : 0;
}
const double* smvp_solution_weights(const smvp_solution* sol) {
  return sol ? sol->value.weights.data() : nullptr;
}
double smvp_solution_gamma(const smvp_solution* sol) { return sol ? sol->value.gamma : kNaN; }
size_t smvp_solution_iterations(const smvp_solution* sol) { return sol ? sol->value.iterations : 0; }
int smvp_solution_converged(const smvp_solution* sol) { return sol && sol->value.converged ? 1 : 0; }
double smvp_solution_objective(const smvp_solution* sol) { return sol ? sol->value.objective : kNaN; }
double smvp_solution_kkt_residual(const smvp_solution* sol) {
  return sol ? sol->value.kkt_residual : kNaN;
}

smvp_status smvp_objective(const smvp_covariance* cov, const smvp_penalty* penalty, const double* w,
                           size_t p, double* out) {
  SMVP_REQUIRE(cov && penalty && w && out);
  return guard([&] {
    if (p != cov->value.dim()) throw smvp::DimensionError("weight length does not match covariance");
    smvp::validate(penalty->value, p);
    *out = smvp::objective_value(cov->value, penalty->value, copy_vector(w, p));
    return SMVP_OK;
  });
}

// ---- sweeps

smvp_status smvp_sweep(const smvp_covariance* cov, const smvp_penalty* base, const double* lambdas,
                       size_t n_lambdas, const double* params, size_t n_params,
                       const smvp_solver_options* opts, size_t threads, smvp_sweep_result** out) {
  SMVP_REQUIRE(cov && base && lambdas && params && out);
  return guard([&] {
    smvp::SweepSpec spec{base->value, std::vector<double>(lambdas, lambdas + n_lambdas),
                         std::vector<double>(params, params + n_params)};
    *out = new smvp_sweep_result{smvp::sweep(cov->value, spec, to_cpp(opts), threads),
                                 cov->value.asset_ids()};
    if (smvp_sweep_failures(*out) + smvp_sweep_nonconverged(*out) > 0)
      return fail(SMVP_NOT_CONVERGED, "some grid points failed or did not converge");
    return SMVP_OK;
  });
}

smvp_status smvp_sweep_write(const smvp_sweep_result* res, const char* dir) {
  SMVP_REQUIRE(res && dir);
  return guard([&] {
    smvp::io::write_sweep(dir, res->points, res->asset_ids);
    return SMVP_OK;
  });
}

void smvp_sweep_free(smvp_sweep_result* res) { delete res; }
size_t smvp_sweep_points(const smvp_sweep_result* res) { return res ? res->points.size() : 0; }

size_t smvp_sweep_failures(const smvp_sweep_result* res) {
  size_t n = 0;
  if (res)
    for (const auto& pt : res->points) n += pt.solution ? 0 : 1;
  return n;
}

size_t smvp_sweep_nonconverged(const smvp_sweep_result* res) {
  size_t n = 0;
  if (res)
    for (const auto& pt : res->points) n += pt.solution && !pt.solution->converged ? 1 : 0;
  return n;
}

// ---- backtests

void smvp_backtest_options_init(smvp_backtest_options* opts) {
  if (!opts) return;
  const smvp::BacktestOptions d;
  opts->window = d.window;
  smvp_solver_options_init(&opts->solver);
  opts->divisor = SMVP_DIVISOR_UNBIASED;
  opts->covariance_scale = d.covariance_scale;
  opts->warm_start = d.warm_start ? 1 : 0;
  opts->threads = d.threads;
  opts->active_tol = d.active_tol;
  opts->fee_rate = d.fee_rate;
}

smvp_status smvp_backtest_run(const smvp_panel* panel, smvp_strategy strategy,
                              const smvp_penalty* penalty, const smvp_backtest_options* opts,
                              smvp_report** out) {
  SMVP_REQUIRE(panel && out);
  return guard([&] {
    smvp::Strategy s;
    switch (strategy) {
      case SMVP_STRATEGY_PENALIZED:
        if (!penalty) return fail(SMVP_INVALID_ARGUMENT, "penalized strategy needs a penalty");
        s = smvp::Penalized{penalty->value};
        break;
      case SMVP_STRATEGY_EQUAL_WEIGHT:
        s = smvp::EqualWeight{};
        break;
      case SMVP_STRATEGY_NO_SHORTSALE:
        s = smvp::NoShortsale{};
        break;
      default:
        return fail(SMVP_INVALID_ARGUMENT, "unknown strategy");
    }
    smvp::BacktestOptions o;
    if (opts) {
      o.window = opts->window;
      o.solver = to_cpp(&opts->solver);
      o.divisor = to_cpp(opts->divisor);
      o.covariance_scale = opts->covariance_scale;
      o.warm_start = opts->warm_start != 0;
      o.threads = opts->threads;
      o.active_tol = opts->active_tol;
      o.fee_rate = opts->fee_rate;
    }
    auto rep = smvp::run(panel->value, s, o);
    auto summary = smvp::io::summary_json(rep);
    *out = new smvp_report{std::move(rep), std::move(summary)};
    for (const auto& d : (*out)->value.diagnostics)
      if (!d.converged || d.carried_forward)
        return fail(SMVP_NOT_CONVERGED, "some rebalance dates failed or did not converge");
    return SMVP_OK;
  });
}

smvp_status smvp_report_write(const smvp_report* rep, const char* dir) {
  SMVP_REQUIRE(rep && dir);
  return guard([&] {
    smvp::io::write_report(dir, rep->value);
    return SMVP_OK;
  });
}

smvp_status smvp_report_read(const char* dir, smvp_report** out) {
  SMVP_REQUIRE(dir && out);
  return guard([&] {
    auto rep = smvp::io::read_report(dir);
    auto summary = smvp::io::summary_json(rep);
    *out = new smvp_report{std::move(rep), std::move(summary)};
    return SMVP_OK;
  });
}

void smvp_report_free(smvp_report* rep) { delete rep; }
const char* smvp_report_summary_json(const smvp_report* rep) {
  return rep ? rep->summary.c_str() : nullptr;
}
size_t smvp_report_dates(const smvp_report* rep) { return rep ? rep->value.dates() : 0; }
size_t smvp_report_assets(const smvp_report* rep) { return rep ? rep->value.asset_ids.size() : 0; }

int64_t smvp_report_date(const smvp_report* rep, size_t k) {
  if (!rep || k >= rep->value.dates()) return 0;
  return rep->value.rebalance_dates[k];
}

double smvp_report_weight(const smvp_report* rep, size_t k, size_t i) {
  if (!rep || k >= rep->value.dates() || i >= rep->value.asset_ids.size()) return kNaN;
  return rep->value.weights(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
}

smvp_status smvp_report_series(const smvp_report* rep, smvp_series which, double* out) {
  SMVP_REQUIRE(rep && out);
  const smvp::Vector* v = series_of(rep, which);
  if (!v) return fail(SMVP_INVALID_ARGUMENT, "unknown series");
  for (Eigen::Index k = 0; k < v->size(); ++k) out[k] = (*v)(k);
  return SMVP_OK;
}

double smvp_report_median(const smvp_report* rep, smvp_series which) {
  if (!rep) return kNaN;
  const smvp::Vector* v = series_of(rep, which);
  return v ? smvp::median(*v) : kNaN;
}

double smvp_report_oos_variance(const smvp_report* rep) { return rep ? rep->value.oos_variance : kNaN; }
double smvp_report_sharpe(const smvp_report* rep) { return rep ? rep->value.sharpe : kNaN; }

int smvp_report_converged(const smvp_report* rep, size_t k) {
  return rep && k < rep->value.dates() && rep->value.diagnostics[k].converged ? 1 : 0;
}

int smvp_report_carried_forward(const smvp_report* rep, size_t k) {
  return rep && k < rep->value.dates() && rep->value.diagnostics[k].carried_forward ? 1 : 0;
}

}  // extern "C"
