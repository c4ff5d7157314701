#pragma once

// Single entry point that routes a penalty to its solver.

#include "smvp/model.hpp"

namespace smvp {

/// Elastic net, mean-variance and weighted l1 go to coordinate descent,
/// berhu and the group penalty to their dedicated solvers.
Solution solve_penalized(const CovarianceMatrix& sigma, const PenaltyConfig& penalty,
                         const SolverOptions& opts = {}, const WarmStart* warm = nullptr);

}  // namespace smvp
