#pragma once

// Block coordinate-wise descent for the adaptive group portfolio
//   min w'Sigma w + lambda1 sum_l sqrt(w_l' A_ll w_l)  s.t. 1'w = 1,
// where A_ll is the covariance block of group l.

#include <vector>

#include "smvp/model.hpp"

namespace smvp {

/// Symmetric inverse square root Q diag(ev^{-1/2}) Q' of a symmetric positive
/// definite matrix. Throws IllConditionedError if the smallest eigenvalue is
/// not above rel_floor * largest eigenvalue.
Matrix inverse_sqrt_sym(const Matrix& a, double rel_floor = 1e-10);

/// Per-group factorizations. They depend only on Sigma, so one workspace
/// serves a whole solve; only `b` tracks the iterate.
struct GroupBlock {
  std::vector<std::size_t> members;
  Matrix a;              ///< A_ll
  Matrix inv;            ///< A_ll^{-1}
  Matrix inv_sqrt;       ///< A_ll^{-1/2}
  Vector inv_sqrt_ones;  ///< A_ll^{-1/2} 1
};

struct GroupWorkspace {
  GroupWorkspace(const CovarianceMatrix& sigma, const GroupStructure& grouping);

  /// Recomputes every B_l = 2 sum_{j != l} A_lj w_j from w.
  void refresh(const CovarianceMatrix& sigma, const Vector& w);

  std::size_t groups() const noexcept { return blocks.size(); }

  std::vector<GroupBlock> blocks;
  std::vector<Vector> b;
  double gamma_scale = 1.0;  ///< gamma_floor(sigma), used to size search brackets
};

/// ||A_ll^{-1/2} (gamma 1 - B_l)||_2. The group is zero at the optimum of its
/// block subproblem exactly when this is <= lambda1.
double lambda_l(double gamma, const GroupWorkspace& ws, std::size_t l);

/// 1/2 (1 - lambda1 / Lambda_l(gamma))_+ A_ll^{-1} (gamma 1 - B_l); exactly
/// zero when Lambda_l(gamma) <= lambda1.
Vector update_group(std::size_t l, double gamma, const GroupWorkspace& ws, double lambda1);

struct GammaSearch {
  double gamma = 0.0;
  double residual_sq = 0.0;  ///< (1 - sum_l 1'w_l(gamma))^2 at `gamma`
  bool bracketed = false;    ///< false if no sign change was found
};

/// Minimizes (1 - sum_l 1'w_l(gamma))^2 over gamma with B fixed. The budget
/// sum is nondecreasing in gamma, so the minimizer is a root located by
/// bracket expansion from gamma_prev followed by bisection.
GammaSearch solve_gamma(const GroupWorkspace& ws, double lambda1, double gamma_prev);

/// Solves the adaptive group problem. Every diagonal block must be positive
/// definite.
Solution solve_adaptive_group(const CovarianceMatrix& sigma, const GroupStructure& grouping,
                              double lambda1, const SolverOptions& opts = {},
                              const WarmStart* warm = nullptr);

/// Largest violation of the group stationarity system in the
/// reparameterized coordinates x_l = A_ll^{1/2} w_l: the nonzero-block
/// equation for active groups and max(Lambda_l - lambda1, 0) for zero
/// groups. Budget not included.
double group_stationarity(const CovarianceMatrix& sigma, const GroupStructure& grouping,
                          double lambda1, const Solution& sol);

}  // namespace smvp
