#include "smvp/backtest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "overloaded.hpp"
#include "smvp/oracle.hpp"
#include "smvp/solve.hpp"

namespace smvp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

struct DateSolve {
  std::optional<Solution> solution;
  std::string error;
};

DateSolve solve_date(const ReturnsPanel& panel, std::size_t start, const Strategy& strategy,
                     const BacktestOptions& opts, const WarmStart* warm) {
  const auto p = panel.assets();
  DateSolve out;
  try {
    if (std::holds_alternative<EqualWeight>(strategy)) {
      Solution sol;
      sol.weights = Vector::Constant(ix(p), 1.0 / static_cast<double>(p));
      sol.gamma = kNaN;
      sol.converged = true;
      out.solution = std::move(sol);
      return out;
    }
    CovarianceMatrix sigma = sample_covariance(panel, start, opts.window, opts.divisor);
    if (opts.covariance_scale != 1.0) sigma = sigma.scaled(opts.covariance_scale);
    if (std::holds_alternative<NoShortsale>(strategy)) {
      out.solution = solve_no_shortsale(sigma);
    } else {
      out.solution = solve_penalized(sigma, std::get<Penalized>(strategy).penalty, opts.solver, warm);
    }
    if (!out.solution->weights.allFinite()) {
      out.solution.reset();
      out.error = "non-finite weights";
    }
  } catch (const std::exception& e) {
    out.solution.reset();
    out.error = e.what();
  }
  return out;
}

}  // namespace

std::string strategy_name(const Strategy& strategy) {
  return std::visit(detail::Overloaded{
                        [](const Penalized& s) { return family_name(s.penalty); },
                        [](const EqualWeight&) { return std::string("equal-weight"); },
                        [](const NoShortsale&) { return std::string("no-shortsale"); },
                    },
                    strategy);
}

double portfolio_return(const Vector& w, const Vector& r) {
  if (w.size() != r.size()) throw DimensionError("weights and returns differ in length");
  double total = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) total += w(i) * r(i);
  return total;
}

double turnover(const Vector& w_next, const Vector& w_prev, const Vector& r_prev) {
  if (w_next.size() != w_prev.size() || w_prev.size() != r_prev.size())
    throw DimensionError("turnover inputs differ in length");
  const double growth = 1.0 + portfolio_return(w_prev, r_prev);
  if (!(growth > 0.0)) throw DataError("portfolio wiped out: 1 + previous return <= 0");
  double total = 0.0;
  for (Eigen::Index i = 0; i < w_next.size(); ++i)
    total += std::abs(w_next(i) - w_prev(i) * (1.0 + r_prev(i)) / growth);
  return total;
}

double pac(const Vector& w, double active_tol) {
  if (w.size() == 0) return 0.0;
  Eigen::Index active = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (std::abs(w(i)) > active_tol) ++active;
  return static_cast<double>(active) / static_cast<double>(w.size());
}

double aps(const Vector& w, double active_tol) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w(i) < -active_tol) total += -w(i);
  return total;
}

double median(const Vector& values) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (std::isfinite(values(i))) v.push_back(values(i));
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

BacktestReport run(const ReturnsPanel& input, const Strategy& strategy,
                   const BacktestOptions& opts) {
  if (opts.window < 2) throw InvalidArgument("window must be at least 2");
  if (input.periods() <= opts.window)
    throw InvalidArgument("panel needs more periods than the window length");
  if (!(opts.covariance_scale > 0.0) || !std::isfinite(opts.covariance_scale))
    throw InvalidArgument("covariance_scale must be positive and finite");
  if (opts.threads < 1) throw InvalidArgument("threads must be at least 1");
  opts.solver.validate();
  if (const auto* pen = std::get_if<Penalized>(&strategy)) validate(pen->penalty, input.assets());

  const ReturnsPanel panel = input.has_missing() ? impute_missing(input) : input;
  const std::size_t p = panel.assets();
  const std::size_t n = panel.periods() - opts.window;

  std::vector<DateSolve> solves(n);
  if (opts.warm_start) {
    std::optional<WarmStart> warm;
    for (std::size_t k = 0; k < n; ++k) {
      solves[k] = solve_date(panel, k, strategy, opts, warm ? &*warm : nullptr);
      if (solves[k].solution) warm = WarmStart{solves[k].solution->weights, solves[k].solution->gamma};
    }
  } else if (opts.threads == 1 || n < 2) {
    for (std::size_t k = 0; k < n; ++k) solves[k] = solve_date(panel, k, strategy, opts, nullptr);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t k = next++; k < n; k = next++)
        solves[k] = solve_date(panel, k, strategy, opts, nullptr);
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min(opts.threads, n);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  BacktestReport rep;
  rep.strategy = strategy_name(strategy);
  rep.window = opts.window;
  rep.asset_ids = panel.asset_ids();
  rep.weights.resize(ix(n), ix(p));
  rep.portfolio_returns.resize(ix(n));
  rep.turnover.resize(ix(n));
  rep.pac.resize(ix(n));
  rep.aps.resize(ix(n));
  rep.gamma.resize(ix(n));
  rep.fees.resize(ix(n));
  rep.diagnostics.resize(n);

  Vector prev_w = Vector::Constant(ix(p), 1.0 / static_cast<double>(p));
  Vector prev_r;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = k + opts.window;
    rep.rebalance_dates.push_back(panel.dates()[t]);
    DateDiagnostics& diag = rep.diagnostics[k];
    Vector w;
    if (solves[k].solution) {
      const Solution& sol = *solves[k].solution;
      w = sol.weights;
      rep.gamma(ix(k)) = sol.gamma;
      diag.converged = sol.converged;
      diag.iterations = sol.iterations;
      diag.kkt_residual = sol.kkt_residual;
    } else {
      w = prev_w;
      rep.gamma(ix(k)) = kNaN;
      diag.carried_forward = true;
      diag.message = solves[k].error;
    }
    const Vector r = panel.returns().row(ix(t)).transpose();
    rep.weights.row(ix(k)) = w.transpose();
    rep.portfolio_returns(ix(k)) = portfolio_return(w, r);
    if (k == 0) {
      rep.turnover(ix(k)) = kNaN;
    } else {
      try {
        rep.turnover(ix(k)) = turnover(w, prev_w, prev_r);
      } catch (const DataError& e) {
        rep.turnover(ix(k)) = kNaN;
        diag.wiped_out = true;
        if (diag.message.empty()) diag.message = e.what();
      }
    }
    rep.fees(ix(k)) = rep.turnover(ix(k)) * opts.fee_rate;
    rep.pac(ix(k)) = pac(w, opts.active_tol);
    rep.aps(ix(k)) = aps(w, opts.active_tol);
    prev_w = std::move(w);
    prev_r = r;
  }

  const auto& ret = rep.portfolio_returns;
  if (n < 2) {
    rep.oos_variance = kNaN;
    rep.sharpe = kNaN;
    return rep;
  }
  const SampleMoments m =
      sample_moments(std::span<const double>(ret.data(), static_cast<std::size_t>(ret.size())),
                     opts.divisor);
  rep.oos_variance = m.variance;
  rep.sharpe = m.variance > 0.0 ? m.mean / std::sqrt(m.variance) : kNaN;
  return rep;
}

}  // namespace smvp
