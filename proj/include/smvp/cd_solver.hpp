#pragma once

// Coordinate-wise descent for the budget-constrained MVP with a separable
// elastic-net style penalty. The mean-variance and weighted-l1 variants share
// the same loop through CoordinateModel.

#include <functional>
#include <optional>

#include "smvp/model.hpp"

namespace smvp {

/// sign(x) * max(|x| - y, 0). Returns exactly 0 inside the dead zone,
/// including the tie |x| == y.
double soft_threshold(double x, double y);

/// Separable per-coordinate terms l1_i |w_i| + ridge_i w_i^2 - linear_i w_i
/// added to w'Sigma w. Covers ElasticNet, MeanVariance and WeightedL1.
struct CoordinateModel {
  Vector l1;
  Vector ridge;
  Vector linear;

  static CoordinateModel elastic_net(std::size_t p, double lambda, double alpha);
  /// Throws InvalidArgument for the berhu and group families.
  static CoordinateModel from_penalty(const PenaltyConfig& penalty, std::size_t p);

  /// 2 (sigma_i^2 + ridge_i); the curvature of coordinate i.
  double curvature(const CovarianceMatrix& sigma, std::size_t i) const;
};

/// Iterate of the solver. z(i) caches 2 sum_{j != i} w_j sigma_ij.
struct CdState {
  Vector w;
  double gamma = 0.0;
  Vector z;
  std::size_t sweep = 0;

  CdState(const CovarianceMatrix& sigma, Vector weights, double gamma);

  /// Recomputes z from w in O(p^2).
  void refresh_z(const CovarianceMatrix& sigma);
  /// Sets w_i and applies the O(p) correction z_j += 2 sigma_ij * delta, j != i.
  void set_weight(std::size_t i, double value, const CovarianceMatrix& sigma);
  /// max_i |z_i - exact_i| / (1 + |z_i|).
  double z_drift(const CovarianceMatrix& sigma) const;
};

/// Coordinate minimizer of the Lagrangian at fixed gamma for the elastic net:
/// ST(gamma - z_i, lambda alpha) / (2 (sigma_i^2 + lambda (1 - alpha))).
/// Throws DegenerateAssetError when the denominator is zero.
double update_weight(std::size_t i, const CdState& state, const CovarianceMatrix& sigma,
                     double lambda, double alpha);
/// General form ST(gamma + linear_i - z_i, l1_i) / (2 (sigma_i^2 + ridge_i)).
double update_weight(std::size_t i, const CdState& state, const CovarianceMatrix& sigma,
                     const CoordinateModel& model);

/// Multiplier that makes the active weights, recomputed with their current
/// signs, sum to one. nullopt when every weight is zero.
std::optional<double> update_gamma(const CdState& state, const CovarianceMatrix& sigma,
                                   double lambda, double alpha);
std::optional<double> update_gamma(const CdState& state, const CovarianceMatrix& sigma,
                                   const CoordinateModel& model);

/// Root of total(gamma) = 1 for a nondecreasing, unbounded-above total, by
/// bracket expansion from gamma_prev (initial step 0.1 max(|gamma_prev|,
/// scale), doubling) and bisection down to adjacent doubles.
double budget_root(const std::function<double(double)>& total, double gamma_prev, double scale);

/// Step control for the multiplier fixed point. The plain update can cycle
/// between two active sets; each time the budget residual changes sign the
/// step toward the proposed gamma is halved (down to 1/1024); two agreeing
/// signs in a row double it again, up to a full step.
class GammaDamper {
 public:
  /// budget_residual is 1'w - 1 for the weights the proposal was computed from.
  double next(double gamma, double proposed, double budget_residual);
  double factor() const noexcept { return factor_; }

 private:
  double factor_ = 1.0;
  int last_sign_ = 0;
  int streak_ = 0;
};

/// Natural scale of the unregularized multiplier: 2 * min_i sigma_i^2
/// (falls back to 2 * mean variance when some variance is zero).
double gamma_floor(const CovarianceMatrix& sigma);
/// Starting multiplier max(scale, gamma_floor) * 1.1.
double initial_gamma(const CovarianceMatrix& sigma, double penalty_scale);

/// True when the penalty is too small for coordinate descent to be
/// practical (scale < 1e-8 * trace / p); such solves go to solve_unpenalized.
bool below_regularization_floor(const CovarianceMatrix& sigma, double penalty_scale);

/// Direct solution of min w'Sigma w - linear'w s.t. 1'w = 1 via the bordered
/// linear system. `iterations` is 0 and `converged` reports whether the
/// system residual is at rounding level. Objective and KKT fields are left
/// for the caller.
Solution solve_unpenalized(const CovarianceMatrix& sigma, const Vector* linear = nullptr);

/// Solves the ElasticNet, MeanVariance or WeightedL1 problem. Returns the last
/// iterate with converged == false if max_sweeps is reached.
Solution solve(const CovarianceMatrix& sigma, const PenaltyConfig& penalty,
               const SolverOptions& opts = {}, const WarmStart* warm = nullptr);

/// Lagrangian objective(w) - gamma (1'w - 1).
double lagrangian(const CovarianceMatrix& sigma, const PenaltyConfig& penalty, const Vector& w,
                  double gamma);

/// Largest stationarity violation over coordinates plus |1'w - 1|, for any
/// penalty family (berhu and group use their own stationarity systems).
double kkt_residual(const CovarianceMatrix& sigma, const PenaltyConfig& penalty,
                    const Solution& sol);

}  // namespace smvp
