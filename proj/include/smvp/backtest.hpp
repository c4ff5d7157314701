#pragma once

// Rolling-window rebalancing engine. At each out-of-sample date t the
// covariance is estimated from the previous `window` periods, the strategy is
// solved, and the realized return, turnover, activity and short exposure of
// the resulting portfolio are recorded.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "smvp/covariance.hpp"
#include "smvp/model.hpp"

namespace smvp {

struct Penalized {
  PenaltyConfig penalty;
};
struct EqualWeight {};
struct NoShortsale {};

using Strategy = std::variant<Penalized, EqualWeight, NoShortsale>;

/// "equal-weight", "no-shortsale" or the penalty family name.
std::string strategy_name(const Strategy& strategy);

struct BacktestOptions {
  std::size_t window = 120;
  SolverOptions solver;
  Divisor divisor = Divisor::Unbiased;
  /// Multiplies every window covariance before solving. The panel holds
  /// fractional returns; 1e4 puts the covariance in percent-squared units,
  /// the scale on which lambda grids such as [0, 30] are meaningful.
  double covariance_scale = 1e4;
  bool warm_start = false;  ///< start each date from the previous solution
  std::size_t threads = 1;  ///< concurrent per-date solves (ignored with warm_start)
  double active_tol = 1e-8;
  double fee_rate = 0.0015;  ///< fee column = turnover * fee_rate
};

struct DateDiagnostics {
  bool converged = false;
  bool carried_forward = false;  ///< solve failed; previous weights reused
  bool wiped_out = false;        ///< 1 + previous portfolio return <= 0
  std::size_t iterations = 0;
  double kkt_residual = 0.0;
  std::string message;
};

struct BacktestReport {
  std::string strategy;
  std::size_t window = 0;
  std::vector<std::string> asset_ids;
  std::vector<std::int64_t> rebalance_dates;
  Matrix weights;  ///< one row per rebalance date
  Vector portfolio_returns;
  Vector turnover;  ///< NaN on the first date and on wiped-out dates
  Vector pac;
  Vector aps;
  Vector gamma;  ///< NaN for EqualWeight and carried-forward dates
  Vector fees;
  std::vector<DateDiagnostics> diagnostics;
  double oos_variance = 0.0;
  double sharpe = 0.0;

  std::size_t dates() const noexcept { return rebalance_dates.size(); }
};

double portfolio_return(const Vector& w, const Vector& r);

/// sum_i |w_next_i - w_prev_i (1 + r_prev_i) / (1 + w_prev'r_prev)|. Throws
/// DataError when 1 + w_prev'r_prev <= 0.
double turnover(const Vector& w_next, const Vector& w_prev, const Vector& r_prev);

/// Share of weights with |w_i| > active_tol.
double pac(const Vector& w, double active_tol = 1e-8);
/// Sum of |w_i| over w_i < -active_tol.
double aps(const Vector& w, double active_tol = 1e-8);

/// Median of the finite entries; NaN if there are none.
double median(const Vector& values);

/// Runs the rolling-window backtest over every date t > window. Missing
/// cells are filled by impute_missing first. Requires T > window >= 2.
BacktestReport run(const ReturnsPanel& panel, const Strategy& strategy,
                   const BacktestOptions& opts = {});

}  // namespace smvp
