#pragma once

// Reference solvers that share no code path with the coordinate-descent
// solvers: a small-scale generic minimizer of every penalized objective and
// an active-set no-shortsale MVP solver (also the NoShortsale benchmark).

#include <cstdint>

#include "smvp/model.hpp"

namespace smvp {

struct OracleOptions {
  std::size_t max_dim = 16;
  std::size_t starts = 32;                 ///< start 0 is 1/p, the rest random feasible
  std::size_t subgradient_iterations = 3000;
  double initial_step = 0.5;               ///< step_k = initial_step / sqrt(k + 1) on unit directions
  std::uint64_t seed = 0x5eed5eedULL;
};

/// Minimizes objective_value(sigma, penalty, .) subject to 1'w = 1.
///
/// Each start runs projected subgradient descent to localize the sign (or
/// active-group) pattern. The pattern is then polished exactly: an active-set
/// walk over equality-constrained quadratic subproblems for the separable
/// penalties, and an equality-constrained Newton method on the active groups
/// for the group penalty, iterated until the optimality conditions hold.
/// Returns the lowest objective over starts (ties: lowest start index) and
/// never anything worse than 1/p. `converged` reports whether the winner
/// passed optimality verification; `kkt_residual` is that verification
/// residual. Throws InvalidArgument if p > max_dim.
Solution solve_generic(const CovarianceMatrix& sigma, const PenaltyConfig& penalty,
                       const OracleOptions& opts = {});

struct NoShortsaleOptions {
  double kkt_tol = 1e-8;
  std::size_t iterations_per_asset = 10;  ///< cycling guard: at most this many * p steps
};

/// min w'Sigma w s.t. 1'w = 1, w >= 0 by a primal active-set method started
/// at 1/p. `converged` is true only when stationarity, primal feasibility and
/// multiplier signs all verify within kkt_tol; `kkt_residual` reports the
/// worst of them.
Solution solve_no_shortsale(const CovarianceMatrix& sigma, const NoShortsaleOptions& opts = {});

}  // namespace smvp
