#include "smvp/berhu_solver.hpp"

#include <algorithm>
#include <cmath>

#include "smvp/cd_solver.hpp"

namespace smvp {

namespace {

constexpr std::size_t kRefreshEvery = 50;

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

}  // namespace

double berhu_penalty(const Vector& w, double lambda, double delta) {
  if (!(delta > 0.0)) throw InvalidArgument("berhu delta must be > 0");
  double total = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double a = std::abs(w(i));
    total += a < delta ? a : (a * a + delta * delta) / (2.0 * delta);
  }
  return lambda * total;
}

double berhu_update_weight(double a, double sigma2, double lambda, double delta) {
  if (std::abs(a) < 2.0 * sigma2 * delta + lambda) return soft_threshold(a, lambda) / (2.0 * sigma2);
  return a / (2.0 * sigma2 + lambda / delta);
}


Solution solve_berhu(const CovarianceMatrix& sigma, double lambda, double delta,
                     const SolverOptions& opts, const WarmStart* warm) {
  opts.validate();
  const PenaltyConfig penalty = Berhu{lambda, delta};
  const auto p = sigma.dim();
  validate(penalty, p);

  auto finish = [&](Solution sol) {
    sol.objective = objective_value(sigma, penalty, sol.weights);
    sol.kkt_residual = kkt_residual(sigma, penalty, sol);
    return sol;
  };
  if (below_regularization_floor(sigma, lambda)) return finish(solve_unpenalized(sigma));
  for (std::size_t i = 0; i < p; ++i)
    if (!(sigma.variance(i) > 0.0)) throw DegenerateAssetError(i);

  Vector w0 = Vector::Constant(ix(p), 1.0 / static_cast<double>(p));
  double g0 = initial_gamma(sigma, lambda);
  if (warm && static_cast<std::size_t>(warm->weights.size()) == p && warm->weights.allFinite() &&
      std::isfinite(warm->gamma)) {
    w0 = warm->weights;
    g0 = warm->gamma;
  }
  CdState state(sigma, std::move(w0), g0);

  Solution sol;
  GammaDamper damper;
  while (state.sweep < opts.max_sweeps) {
    ++state.sweep;
    double max_dw = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      const double next =
          berhu_update_weight(state.gamma - state.z(ix(i)), sigma.variance(i), lambda, delta);
      max_dw = std::max(max_dw, std::abs(next - state.w(ix(i))));
      state.set_weight(i, next, sigma);
    }
    if (state.sweep % kRefreshEvery == 0) state.refresh_z(sigma);

    // Branch membership is evaluated at each trial gamma, so Delta+/- follow gamma.
    const double next_gamma = budget_root(
        [&](double g) {
          double s = 0.0;
          for (std::size_t i = 0; i < p; ++i)
            s += berhu_update_weight(g - state.z(ix(i)), sigma.variance(i), lambda, delta);
          return s;
        },
        state.gamma, gamma_floor(sigma) + lambda);
    const double dgamma = std::abs(next_gamma - state.gamma);
    const double residual = state.w.sum() - 1.0;
    state.gamma = damper.next(state.gamma, next_gamma, residual);
    const double budget = std::abs(residual);
    if (max_dw <= opts.coord_tol && budget <= opts.budget_tol &&
        dgamma <= opts.coord_tol * (1.0 + std::abs(state.gamma))) {
      sol.converged = true;
      break;
    }
  }
  sol.weights = state.w;
  sol.gamma = state.gamma;
  sol.iterations = state.sweep;
  return finish(std::move(sol));
}

double berhu_stationarity(const CovarianceMatrix& sigma, double lambda, double delta,
                          const Solution& sol) {
  const Vector grad = 2.0 * (sigma.sigma() * sol.weights);
  double worst = 0.0;
  for (std::size_t i = 0; i < sigma.dim(); ++i) {
    const double wi = sol.weights(ix(i));
    const double g = grad(ix(i)) - sol.gamma;
    double v;
    if (std::abs(wi) >= delta) {
      v = std::abs(g + lambda * wi / delta);
    } else if (wi > 0.0) {
      v = std::abs(g + lambda);
    } else if (wi < 0.0) {
      v = std::abs(g - lambda);
    } else {
      v = std::max(std::abs(g) - lambda, 0.0);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace smvp
