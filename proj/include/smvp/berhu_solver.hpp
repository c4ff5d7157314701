#pragma once

// Coordinate-wise descent for the MVP with the reverse-Huber (berhu)
// penalty: l1 below |w| = delta, quadratic above.

#include "smvp/model.hpp"

namespace smvp {

/// lambda * sum_i ( |w_i| if |w_i| < delta, else (w_i^2 + delta^2) / (2 delta) ).
double berhu_penalty(const Vector& w, double lambda, double delta);

/// Exact minimizer of sigma2 w^2 - a w + lambda berhu(w):
/// ST(a, lambda) / (2 sigma2) if |a| < 2 sigma2 delta + lambda, otherwise
/// a / (2 sigma2 + lambda / delta). Here a = gamma - z_i.
double berhu_update_weight(double a, double sigma2, double lambda, double delta);

/// Solves the berhu-penalized MVP. Requires every variance > 0.
Solution solve_berhu(const CovarianceMatrix& sigma, double lambda, double delta,
                     const SolverOptions& opts = {}, const WarmStart* warm = nullptr);

/// Largest violation of the four-case berhu stationarity conditions
/// (w in (0, delta), (-delta, 0), {0}, |w| >= delta). Budget not included.
double berhu_stationarity(const CovarianceMatrix& sigma, double lambda, double delta,
                          const Solution& sol);

}  // namespace smvp
