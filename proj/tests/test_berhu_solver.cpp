#include <gtest/gtest.h>

#include <cmath>

#include "smvp/berhu_solver.hpp"
#include "smvp/cd_solver.hpp"
#include "smvp/oracle.hpp"
#include "test_util.hpp"

using namespace smvp;
using smvp::testing::linf;

TEST(BerhuPenalty, Examples) {
  EXPECT_DOUBLE_EQ(berhu_penalty(Vector::Constant(1, 0.5), 1.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(berhu_penalty(Vector::Constant(1, 2.0), 1.0, 1.0), 2.5);
  EXPECT_DOUBLE_EQ(berhu_penalty(Vector::Constant(1, 1.0), 1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(berhu_penalty(Vector::Constant(1, -2.0), 2.0, 1.0), 5.0);
}

TEST(BerhuPenalty, ContinuousAcrossDelta) {
  for (double delta : {0.1, 0.5, 2.0}) {
    for (double eps : {1e-6, 1e-9, 1e-12}) {
      const double below = berhu_penalty(Vector::Constant(1, delta - eps), 1.0, delta);
      const double above = berhu_penalty(Vector::Constant(1, delta + eps), 1.0, delta);
      EXPECT_NEAR(below, above, 3.0 * eps);
    }
  }
}

TEST(BerhuUpdate, MinimizesScalarProblem) {
  // Compare against a dense grid of sigma2 w^2 - a w + lambda berhu(w).
  for (double a : {-3.0, -1.2, -0.3, 0.0, 0.4, 1.1, 2.5, 6.0}) {
    const double s2 = 0.7, lambda = 0.8, delta = 0.6;
    const double w = berhu_update_weight(a, s2, lambda, delta);
    auto f = [&](double x) { return s2 * x * x - a * x + berhu_penalty(Vector::Constant(1, x), lambda, delta); };
    for (double x = -6.0; x <= 6.0; x += 1e-3) EXPECT_LE(f(w), f(x) + 1e-12);
  }
  EXPECT_EQ(berhu_update_weight(0.5, 1.0, 1.0, 1.0), 0.0);
}

TEST(SolveBerhu, LambdaZeroIsMvp) {
  std::mt19937_64 rng(31);
  const auto sigma = smvp::testing::random_cov(6, rng);
  const auto s = solve_berhu(sigma, 0.0, 0.5);
  EXPECT_TRUE(s.converged);
  EXPECT_LE(linf(s.weights, smvp::testing::mvp_closed_form(sigma.sigma())), 1e-7);
}

TEST(SolveBerhu, HugeDeltaIsLasso) {
  std::mt19937_64 rng(32);
  for (int k = 0; k < 10; ++k) {
    const auto sigma = smvp::testing::random_cov(3 + static_cast<std::size_t>(k % 6), rng);
    const auto b = solve_berhu(sigma, 0.7, 1e6);
    const auto l = solve(sigma, ElasticNet{0.7, 1.0});
    ASSERT_TRUE(b.converged && l.converged);
    EXPECT_LE(linf(b.weights, l.weights), 1e-6);
  }
}

TEST(SolveBerhu, MatchesOracleAndBranchConsistency) {
  std::mt19937_64 rng(33);
  for (int k = 0; k < 15; ++k) {
    const std::size_t p = 3 + static_cast<std::size_t>(k % 6);
    const auto sigma = smvp::testing::random_cov(p, rng);
    const double lambda = 1.0, delta = 0.3;
    const auto s = solve_berhu(sigma, lambda, delta);
    ASSERT_TRUE(s.converged);
    const auto o = solve_generic(sigma, Berhu{lambda, delta});
    EXPECT_LE(s.objective - o.objective, 1e-6 * (1.0 + std::abs(o.objective)));
    EXPECT_LE(s.kkt_residual, 1e-6 * (1.0 + sigma.max_variance()));

    CdState st(sigma, s.weights, s.gamma);
    const double tol = SolverOptions{}.kkt_tol;
    for (std::size_t i = 0; i < p; ++i) {
      const double wi = std::abs(s.weights(static_cast<Eigen::Index>(i)));
      const double a = std::abs(s.gamma - st.z(static_cast<Eigen::Index>(i)));
      const double edge = 2.0 * sigma.variance(i) * delta + lambda;
      if (wi >= delta) {
        EXPECT_GE(a, edge - tol);
      } else if (wi > 0.0) {
        EXPECT_LT(a, edge + tol);
      }
    }
  }
}

TEST(SolveBerhu, DegenerateAsset) {
  Matrix s = Matrix::Identity(3, 3);
  s(1, 1) = 0.0;
  EXPECT_THROW(solve_berhu(CovarianceMatrix(s), 1.0, 0.5), DegenerateAssetError);
}
