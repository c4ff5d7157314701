#pragma once

// Solves one covariance over a (lambda, parameter) grid and tabulates the
// weight, activity and short-sale profiles.

#include <optional>
#include <string>
#include <vector>

#include "smvp/model.hpp"

namespace smvp {

/// `base` fixes the family and every parameter the grid does not vary.
/// The second grid axis sets alpha for ElasticNet/MeanVariance and delta for
/// Berhu; it must be left as {base value} for the other families.
struct SweepSpec {
  PenaltyConfig base;
  std::vector<double> lambdas;
  std::vector<double> params;
};

struct SweepPoint {
  double lambda = 0.0;
  double param = 0.0;
  std::optional<Solution> solution;  ///< empty if the solve threw
  std::string error;
  double pac = 0.0;
  double prop_positive = 0.0;  ///< |S+| / p
  double prop_negative = 0.0;  ///< |S-| / p
};

/// The grid-axis value carried by `penalty` (alpha, delta, or 0).
double grid_param(const PenaltyConfig& penalty);
/// Copy of `base` with its scale set to lambda and grid axis set to param.
PenaltyConfig with_grid_point(const PenaltyConfig& base, double lambda, double param);

/// Points in lambda-major order. Concurrent solves write to their own slots,
/// so the result does not depend on `threads`.
std::vector<SweepPoint> sweep(const CovarianceMatrix& sigma, const SweepSpec& spec,
                              const SolverOptions& opts = {}, std::size_t threads = 1,
                              double active_tol = 1e-8);

}  // namespace smvp
