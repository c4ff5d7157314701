#include "smvp/cd_solver.hpp"

#include <algorithm>
#include <cmath>

#include "overloaded.hpp"
#include "smvp/berhu_solver.hpp"
#include "smvp/group_solver.hpp"

namespace smvp {

using detail::Overloaded;

namespace {

constexpr std::size_t kRefreshEvery = 50;

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

}  // namespace

double soft_threshold(double x, double y) {
  const double mag = std::abs(x) - y;
  if (mag <= 0.0) return 0.0;
  return x > 0.0 ? mag : -mag;
}

CoordinateModel CoordinateModel::elastic_net(std::size_t p, double lambda, double alpha) {
  const auto n = ix(p);
  return {Vector::Constant(n, lambda * alpha), Vector::Constant(n, lambda * (1.0 - alpha)),
          Vector::Zero(n)};
}

CoordinateModel CoordinateModel::from_penalty(const PenaltyConfig& penalty, std::size_t p) {
  validate(penalty, p);
  return std::visit(
      Overloaded{
          [p](const ElasticNet& en) { return elastic_net(p, en.lambda, en.alpha); },
          [p](const MeanVariance& mv) {
            auto m = elastic_net(p, mv.lambda, mv.alpha);
            m.linear = mv.tau * mv.mu;
            return m;
          },
          [p](const WeightedL1& wl) {
            const auto n = ix(p);
            return CoordinateModel{wl.lambda * wl.eta, Vector::Zero(n), Vector::Zero(n)};
          },
          [](const auto&) -> CoordinateModel {
            throw InvalidArgument("coordinate model exists only for separable l1/l2 penalties");
          },
      },
      penalty);
}

double CoordinateModel::curvature(const CovarianceMatrix& sigma, std::size_t i) const {
  return 2.0 * (sigma.variance(i) + ridge(ix(i)));
}

CdState::CdState(const CovarianceMatrix& sigma, Vector weights, double gamma_)
    : w(std::move(weights)), gamma(gamma_) {
  if (static_cast<std::size_t>(w.size()) != sigma.dim())
    throw DimensionError("state weight length does not match covariance");
  refresh_z(sigma);
}

void CdState::refresh_z(const CovarianceMatrix& sigma) {
  z = 2.0 * (sigma.sigma() * w);
  z -= 2.0 * sigma.sigma().diagonal().cwiseProduct(w);
}

void CdState::set_weight(std::size_t i, double value, const CovarianceMatrix& sigma) {
  const double delta = value - w(ix(i));
  if (delta == 0.0) return;
  w(ix(i)) = value;
  const double zi = z(ix(i));
  z.noalias() += (2.0 * delta) * sigma.sigma().col(ix(i));
  z(ix(i)) = zi;
}

double CdState::z_drift(const CovarianceMatrix& sigma) const {
  Vector exact = 2.0 * (sigma.sigma() * w) - 2.0 * sigma.sigma().diagonal().cwiseProduct(w);
  return ((z - exact).array().abs() / (1.0 + z.array().abs())).maxCoeff();
}

double update_weight(std::size_t i, const CdState& state, const CovarianceMatrix& sigma,
                     const CoordinateModel& model) {
  const double denom = model.curvature(sigma, i);
  if (!(denom > 0.0)) throw DegenerateAssetError(i);
  const double arg = state.gamma + model.linear(ix(i)) - state.z(ix(i));
  return soft_threshold(arg, model.l1(ix(i))) / denom;
}

double update_weight(std::size_t i, const CdState& state, const CovarianceMatrix& sigma,
                     double lambda, double alpha) {
  const double denom = 2.0 * (sigma.variance(i) + lambda * (1.0 - alpha));
  if (!(denom > 0.0)) throw DegenerateAssetError(i);
  return soft_threshold(state.gamma - state.z(ix(i)), lambda * alpha) / denom;
}

std::optional<double> update_gamma(const CdState& state, const CovarianceMatrix& sigma,
                                   const CoordinateModel& model) {
  // Active weights are w_i = (gamma + linear_i - z_i - l1_i s_i) / d_i with
  // s_i = sign(w_i); solve sum_i w_i = 1 for gamma.
  double inv_sum = 0.0;
  double offset = 0.0;
  for (std::size_t i = 0; i < sigma.dim(); ++i) {
    const double wi = state.w(ix(i));
    if (wi == 0.0) continue;
    const double inv = 1.0 / model.curvature(sigma, i);
    const double sign = wi > 0.0 ? 1.0 : -1.0;
    inv_sum += inv;
    offset += (state.z(ix(i)) - model.linear(ix(i)) + model.l1(ix(i)) * sign) * inv;
  }
  if (inv_sum == 0.0) return std::nullopt;
  return (1.0 + offset) / inv_sum;
}

std::optional<double> update_gamma(const CdState& state, const CovarianceMatrix& sigma,
                                   double lambda, double alpha) {
  return update_gamma(state, sigma, CoordinateModel::elastic_net(sigma.dim(), lambda, alpha));
}

double budget_root(const std::function<double(double)>& total, double gamma_prev, double scale) {
  double lo = gamma_prev, hi = gamma_prev;
  double f = total(gamma_prev) - 1.0;
  if (f == 0.0) return gamma_prev;
  double step = 0.1 * std::max(std::abs(gamma_prev), scale);
  for (int n = 0; n < 2000; ++n) {
    if (f < 0.0) {
      lo = hi;
      hi += step;
      f = total(hi) - 1.0;
      if (f >= 0.0) break;
    } else {
      hi = lo;
      lo -= step;
      f = total(lo) - 1.0;
      if (f < 0.0) break;
    }
    step *= 2.0;
  }
  if (!std::isfinite(lo) || !std::isfinite(hi)) return gamma_prev;
  for (int it = 0; it < 2200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = total(mid) - 1.0;
    if (fm == 0.0) return mid;
    (fm < 0.0 ? lo : hi) = mid;
  }
  const double flo = total(lo) - 1.0, fhi = total(hi) - 1.0;
  return std::abs(flo) < std::abs(fhi) ? lo : hi;
}

double GammaDamper::next(double gamma, double proposed, double budget_residual) {
  const int sign = (budget_residual > 0.0) - (budget_residual < 0.0);
  if (sign != 0 && last_sign_ != 0 && sign != last_sign_) {
    factor_ = std::max(factor_ * 0.5, 1.0 / 1024.0);
    streak_ = 0;
  } else if (sign != 0 && sign == last_sign_ && ++streak_ >= 2) {
    factor_ = std::min(factor_ * 2.0, 1.0);
    streak_ = 0;
  }
  if (sign != 0) last_sign_ = sign;
  return gamma + factor_ * (proposed - gamma);
}

double gamma_floor(const CovarianceMatrix& sigma) {
  const double lo = sigma.min_variance();
  if (lo > 0.0) return 2.0 * lo;
  const double mean = sigma.trace() / static_cast<double>(sigma.dim());
  return mean > 0.0 ? 2.0 * mean : 1.0;
}

double initial_gamma(const CovarianceMatrix& sigma, double penalty_scale) {
  return std::max(penalty_scale, gamma_floor(sigma)) * 1.1;
}

bool below_regularization_floor(const CovarianceMatrix& sigma, double penalty_scale) {
  return penalty_scale < 1e-8 * sigma.trace() / static_cast<double>(sigma.dim());
}

Solution solve_unpenalized(const CovarianceMatrix& sigma, const Vector* linear) {
  const auto n = ix(sigma.dim());
  const Vector lin = linear ? *linear : Vector::Zero(n);
  if (lin.size() != n) throw DimensionError("linear term length does not match covariance");
  const Vector ones = Vector::Ones(n);

  Solution sol;
  Eigen::LLT<Matrix> llt(sigma.sigma());
  if (llt.info() == Eigen::Success) {
    // w = Sigma^{-1} (gamma 1 + lin) / 2 with gamma from the budget.
    const Vector a = llt.solve(ones);
    const Vector b = llt.solve(lin);
    const double gamma = (2.0 - ones.dot(b)) / ones.dot(a);
    sol.weights = 0.5 * (gamma * a + b);
    sol.gamma = gamma;
  } else {
    Matrix kkt = Matrix::Zero(n + 1, n + 1);
    kkt.topLeftCorner(n, n) = 2.0 * sigma.sigma();
    kkt.topRightCorner(n, 1) = -ones;
    kkt.bottomLeftCorner(1, n) = ones.transpose();
    Vector rhs(n + 1);
    rhs << lin, 1.0;
    const Vector x = kkt.completeOrthogonalDecomposition().solve(rhs);
    sol.weights = x.head(n);
    sol.gamma = x(n);
  }
  // One step of iterative refinement on the budget.
  const Vector resid = 2.0 * (sigma.sigma() * sol.weights) - lin - sol.gamma * ones;
  const double scale = 1.0 + std::abs(sol.gamma) + lin.cwiseAbs().maxCoeff();
  sol.converged = sol.weights.allFinite() &&
                  resid.cwiseAbs().maxCoeff() <= 1e-9 * scale * (1.0 + sigma.max_variance()) &&
                  std::abs(sol.weights.sum() - 1.0) <= 1e-10;
  return sol;
}

Solution solve(const CovarianceMatrix& sigma, const PenaltyConfig& penalty,
               const SolverOptions& opts, const WarmStart* warm) {
  opts.validate();
  const auto p = sigma.dim();
  const CoordinateModel model = CoordinateModel::from_penalty(penalty, p);
  const double scale = penalty_scale(penalty);

  auto finish = [&](Solution sol) {
    sol.objective = objective_value(sigma, penalty, sol.weights);
    sol.kkt_residual = kkt_residual(sigma, penalty, sol);
    return sol;
  };

  if (below_regularization_floor(sigma, scale)) {
    const bool has_linear = model.linear.any();
    return finish(solve_unpenalized(sigma, has_linear ? &model.linear : nullptr));
  }
  for (std::size_t i = 0; i < p; ++i)
    if (!(model.curvature(sigma, i) > 0.0)) throw DegenerateAssetError(i);

  Vector w0 = Vector::Constant(ix(p), 1.0 / static_cast<double>(p));
  double g0 = initial_gamma(sigma, scale);
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
      const double next = update_weight(i, state, sigma, model);
      max_dw = std::max(max_dw, std::abs(next - state.w(ix(i))));
      state.set_weight(i, next, sigma);
    }
    if (state.sweep % kRefreshEvery == 0) state.refresh_z(sigma);

    // Budget root at fixed z. Equals update_gamma whenever no weight changes
    // sign or leaves the dead zone, and always exists.
    const auto next_gamma = budget_root(
        [&](double g) {
          double s = 0.0;
          for (std::size_t i = 0; i < p; ++i)
            s += soft_threshold(g + model.linear(ix(i)) - state.z(ix(i)), model.l1(ix(i))) /
                 model.curvature(sigma, i);
          return s;
        },
        state.gamma, gamma_floor(sigma) + scale);
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

double lagrangian(const CovarianceMatrix& sigma, const PenaltyConfig& penalty, const Vector& w,
                  double gamma) {
  return objective_value(sigma, penalty, w) - gamma * (w.sum() - 1.0);
}

namespace {

double separable_kkt(const CovarianceMatrix& sigma, const CoordinateModel& model,
                     const Solution& sol) {
  const Vector grad = 2.0 * (sigma.sigma() * sol.weights);
  double worst = 0.0;
  for (std::size_t i = 0; i < sigma.dim(); ++i) {
    const double wi = sol.weights(ix(i));
    const double g =
        grad(ix(i)) + 2.0 * model.ridge(ix(i)) * wi - model.linear(ix(i)) - sol.gamma;
    const double c = model.l1(ix(i));
    double v;
    if (wi > 0.0) {
      v = std::abs(g + c);
    } else if (wi < 0.0) {
      v = std::abs(g - c);
    } else {
      v = std::max(std::abs(g) - c, 0.0);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace

double kkt_residual(const CovarianceMatrix& sigma, const PenaltyConfig& penalty,
                    const Solution& sol) {
  const auto p = sigma.dim();
  if (static_cast<std::size_t>(sol.weights.size()) != p)
    throw DimensionError("solution length does not match covariance");
  if (!sol.weights.allFinite() || !std::isfinite(sol.gamma))
    return std::numeric_limits<double>::infinity();
  const double budget = std::abs(sol.weights.sum() - 1.0);
  const double stationarity = std::visit(
      Overloaded{
          [&](const Berhu& b) { return berhu_stationarity(sigma, b.lambda, b.delta, sol); },
          [&](const AdaptiveGroup& g) {
            return group_stationarity(sigma, g.grouping, g.lambda1, sol);
          },
          [&](const auto&) {
            return separable_kkt(sigma, CoordinateModel::from_penalty(penalty, p), sol);
          },
      },
      penalty);
  return stationarity + budget;
}

}  // namespace smvp
