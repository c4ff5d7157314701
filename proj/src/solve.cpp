#include "smvp/solve.hpp"

#include "overloaded.hpp"
#include "smvp/berhu_solver.hpp"
#include "smvp/cd_solver.hpp"
#include "smvp/group_solver.hpp"

namespace smvp {

Solution solve_penalized(const CovarianceMatrix& sigma, const PenaltyConfig& penalty,
                         const SolverOptions& opts, const WarmStart* warm) {
  validate(penalty, sigma.dim());
  return std::visit(detail::Overloaded{
                        [&](const Berhu& b) {
                          return solve_berhu(sigma, b.lambda, b.delta, opts, warm);
                        },
                        [&](const AdaptiveGroup& g) {
                          return solve_adaptive_group(sigma, g.grouping, g.lambda1, opts, warm);
                        },
                        [&](const auto&) { return solve(sigma, penalty, opts, warm); },
                    },
                    penalty);
}

}  // namespace smvp
