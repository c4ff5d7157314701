#include "smvp/sweep.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "overloaded.hpp"
#include "smvp/backtest.hpp"
#include "smvp/solve.hpp"

namespace smvp {

using detail::Overloaded;

double grid_param(const PenaltyConfig& penalty) {
  return std::visit(Overloaded{
                        [](const ElasticNet& p) { return p.alpha; },
                        [](const MeanVariance& p) { return p.alpha; },
                        [](const Berhu& p) { return p.delta; },
                        [](const auto&) { return 0.0; },
                    },
                    penalty);
}

PenaltyConfig with_grid_point(const PenaltyConfig& base, double lambda, double param) {
  PenaltyConfig out = base;
  std::visit(Overloaded{
                 [&](ElasticNet& p) {
                   p.lambda = lambda;
                   p.alpha = param;
                 },
                 [&](MeanVariance& p) {
                   p.lambda = lambda;
                   p.alpha = param;
                 },
                 [&](Berhu& p) {
                   p.lambda = lambda;
                   p.delta = param;
                 },
                 [&](WeightedL1& p) { p.lambda = lambda; },
                 [&](AdaptiveGroup& p) { p.lambda1 = lambda; },
             },
             out);
  return out;
}

std::vector<SweepPoint> sweep(const CovarianceMatrix& sigma, const SweepSpec& spec,
                              const SolverOptions& opts, std::size_t threads, double active_tol) {
  if (spec.lambdas.empty() || spec.params.empty()) throw InvalidArgument("sweep grids must be nonempty");
  if (threads < 1) throw InvalidArgument("threads must be at least 1");
  const bool has_axis = std::holds_alternative<ElasticNet>(spec.base) ||
                        std::holds_alternative<MeanVariance>(spec.base) ||
                        std::holds_alternative<Berhu>(spec.base);
  if (!has_axis && (spec.params.size() != 1 || spec.params[0] != grid_param(spec.base)))
    throw InvalidArgument(family_name(spec.base) + " has no second grid axis");
  opts.validate();

  std::vector<SweepPoint> points(spec.lambdas.size() * spec.params.size());
  for (std::size_t i = 0; i < spec.lambdas.size(); ++i)
    for (std::size_t j = 0; j < spec.params.size(); ++j) {
      auto& pt = points[i * spec.params.size() + j];
      pt.lambda = spec.lambdas[i];
      pt.param = spec.params[j];
    }
  // Reject bad grid values up front rather than per point.
  for (const auto& pt : points) validate(with_grid_point(spec.base, pt.lambda, pt.param), sigma.dim());

  auto work = [&](SweepPoint& pt) {
    try {
      pt.solution = solve_penalized(sigma, with_grid_point(spec.base, pt.lambda, pt.param), opts);
      const Vector& w = pt.solution->weights;
      const double p = static_cast<double>(w.size());
      pt.pac = smvp::pac(w, active_tol);
      pt.prop_positive = static_cast<double>((w.array() > active_tol).count()) / p;
      pt.prop_negative = static_cast<double>((w.array() < -active_tol).count()) / p;
    } catch (const std::exception& e) {
      pt.solution.reset();
      pt.error = e.what();
    }
  };
  if (threads == 1) {
    for (auto& pt : points) work(pt);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, points.size()); ++t)
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < points.size(); k = next++) work(points[k]);
      });
    for (auto& t : pool) t.join();
  }
  return points;
}

}  // namespace smvp
